"""Peierls-Nabarro kernel, its 2P-periodization and the Cesaro-smoothed kernel.

The smoothed kernel ``sigma`` is the Fejer mean of order ``M`` of the corrected
periodic kernel ``K^P - (2/P) * tail * F_{2M}``.  Its Fourier coefficients are
nonpositive for any admissible ``(P, M)``; every construction path below checks
that property instead of assuming it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

Mode = Literal["cesaro", "cell_average"]

# Positive slack tolerated on c_m(sigma) before the sign guarantee is declared broken.
COEFF_SIGN_TOL = 1e-12
# Imaginary residue of the raw periodized coefficients (evenness check).
IMAG_WARN_TOL = 1e-10
IMAG_FAIL_TOL = 1e-8
# Slack on the discrete L1 bound sum_j dx |sigma_j| <= 5 ||K||_1.
L1_BOUND_SLACK = 1e-9


class KernelError(ValueError):
    """Raised when a kernel construction violates one of its guarantees."""


@dataclass(frozen=True)
class KernelSpec:
    """K(x) = amplitude * (x^2 - zeta^2) / (x^2 + zeta^2)^2."""

    amplitude: float = 1.0
    zeta: float = 1.0

    def __post_init__(self):
        if not self.zeta > 0:
            raise KernelError(f"zeta must be positive, got {self.zeta}")

    def __call__(self, x):
        return eval_physical_kernel(self, x)

    def antiderivative(self, x):
        """Primitive of K vanishing at 0: -A x / (x^2 + zeta^2)."""
        x = np.asarray(x, dtype=float)
        return -self.amplitude * x / (x * x + self.zeta**2)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        z2 = self.zeta**2
        return self.amplitude * 2.0 * x * (3.0 * z2 - x * x) / (x * x + z2) ** 3


def eval_physical_kernel(spec: KernelSpec, x):
    x = np.asarray(x, dtype=float)
    x2 = x * x
    z2 = spec.zeta**2
    return spec.amplitude * (x2 - z2) / (x2 + z2) ** 2


def tail_integral(spec: KernelSpec, P: float) -> float:
    """Closed form of the integral of |K| over |x| >= P.

    Only valid for ``P >= zeta`` where K keeps a constant sign; smaller
    periods are refused rather than integrated numerically.
    """
    if P < spec.zeta:
        raise KernelError(f"tail integral closed form needs P >= zeta ({P} < {spec.zeta})")
    return 2.0 * abs(spec.amplitude) * P / (P * P + spec.zeta**2)


def kernel_l1_norm(spec: KernelSpec) -> float:
    # |K| integrates to A/(2 zeta) on [0, zeta] and on [zeta, inf), per half line.
    return 2.0 * abs(spec.amplitude) / spec.zeta


def fejer_eval(M: int, P: float, x):
    """Fejer kernel F_M(x) = (1/M) (sin(M pi x / 2P) / sin(pi x / 2P))^2.

    The removable singularity on 2P*Z evaluates to ``M``.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    x = np.asarray(x, dtype=float)
    a = np.pi * x / (2.0 * P)
    s = np.sin(a)
    near = np.abs(s) < 1e-9
    safe = np.where(near, 1.0, s)
    out = (np.sin(M * a) / safe) ** 2 / M
    if np.any(near):
        # sin(M a)/sin(a) -> +-M near lattice points, quadratic correction from Taylor.
        d = a - np.pi * np.round(a / np.pi)
        limit = M * (1.0 - (M * M - 1) * d * d / 3.0)
        out = np.where(near, limit, out)
    return out if out.ndim else float(out)


def fejer_coefficients(M: int, m):
    """c_m(F_M) = (1 - |m|/M) for |m| < M, else 0."""
    m = np.abs(np.asarray(m))
    return np.where(m < M, 1.0 - m / M, 0.0)


@dataclass(frozen=True)
class PeriodizationParams:
    P: float
    M: int
    tail_integral: float
    quadrature_oversample: int = 16

    def __post_init__(self):
        if self.P < 1:
            raise KernelError(f"P must be >= 1, got {self.P}")
        if self.M < 1:
            raise KernelError(f"M must be a positive integer, got {self.M}")
        if self.tail_integral < 0:
            raise KernelError("tail_integral must be nonnegative")
        if self.quadrature_oversample < 1:
            raise KernelError("quadrature_oversample must be positive")

    @classmethod
    def for_kernel(cls, spec: KernelSpec, P: float, M: int, quadrature_oversample: int = 16):
        if P < spec.zeta:
            raise KernelError(f"P must be >= zeta ({P} < {spec.zeta})")
        return cls(P=float(P), M=int(M), tail_integral=tail_integral(spec, P),
                   quadrature_oversample=int(quadrature_oversample))


def fourier_coeffs_periodized(spec: KernelSpec, params: PeriodizationParams, m_max: int,
                              base_points: int | None = None) -> np.ndarray:
    """Fourier coefficients c_m(K^P) for m = -m_max..m_max.

    Trapezoid rule on a uniform periodic fine grid of
    ``quadrature_oversample * max(base_points, 4M)`` points.  K^P is continuous
    at +-P but has a kink there, so the O(h^2) Euler-Maclaurin endpoint term
    is subtracted analytically.

    Returns
    -------
    ndarray of shape (2*m_max + 1,), real, index k holds m = k - m_max.
    """
    if m_max < params.M:
        raise ValueError("m_max must be >= M")
    if params.quadrature_oversample < 4:
        raise ValueError("quadrature_oversample must be >= 4")
    P = params.P
    base = max(base_points or 0, 4 * params.M, 2 * m_max + 1)
    n_fine = params.quadrature_oversample * base
    h = 2.0 * P / n_fine
    x = -P + h * np.arange(n_fine)
    samples = eval_physical_kernel(spec, x)

    m = np.arange(-m_max, m_max + 1)
    # sum_k K(x_k) e^{-i pi m x_k / P} = (-1)^m * DFT_{m mod n}(K)
    spectrum = np.fft.fft(samples)
    raw = spectrum[m % n_fine] * np.where(m % 2 == 0, 1.0, -1.0) * h / (2.0 * P)

    imag = np.max(np.abs(raw.imag)) if raw.size else 0.0
    if imag > IMAG_FAIL_TOL:
        raise KernelError(f"periodized coefficients not real (residue {imag:.3e})")

    # Endpoint correction: f = K cos(pi m x/P), f'(P) - f'(-P) = 2 K'(P) (-1)^m.
    sign = np.where(m % 2 == 0, 1.0, -1.0)
    correction = (h * h / 12.0) * 2.0 * spec.derivative(P) * sign / (2.0 * P)
    return raw.real - correction


def cesaro_coefficients(c_KP: np.ndarray, params: PeriodizationParams) -> np.ndarray:
    """c_m(sigma^P_M) for m = -(M-1)..(M-1) from a centred array of c_m(K^P).

    Raises if any coefficient exceeds the sign tolerance.
    """
    M = params.M
    c_KP = np.asarray(c_KP, dtype=float)
    half = (c_KP.size - 1) // 2
    if c_KP.size % 2 != 1 or half < M - 1:
        raise ValueError("c_KP must be centred and cover |m| < M")
    m = np.arange(-(M - 1), M)
    base = c_KP[m + half]
    corrected = base - (2.0 / params.P) * (1.0 - np.abs(m) / (2.0 * M)) * params.tail_integral
    coeffs = (1.0 - np.abs(m) / M) * corrected
    worst = coeffs.max()
    if worst > COEFF_SIGN_TOL:
        raise KernelError(f"Cesaro coefficient sign violated: max c_m = {worst:.3e}")
    return coeffs


@dataclass(frozen=True)
class SmoothedKernel:
    """Cesaro-smoothed kernel on a ring of 2N lags.

    ``samples[j]`` is sigma at lag ``j * dx`` (j taken modulo 2N), which is
    the vector entering the discrete convolution for the velocity.
    """

    coeffs: np.ndarray
    samples: np.ndarray
    mode: str
    l1_discrete: float
    P: float
    M: int
    N: int
    kernel_l1: float
    tail_integral: float
    _samples_hat: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def dx(self) -> float:
        return self.P / self.N

    @property
    def max_coeff(self) -> float:
        return float(self.coeffs.max())

    @property
    def lags(self) -> np.ndarray:
        """Lag positions j*dx wrapped into [-P, P)."""
        j = np.arange(2 * self.N)
        return np.where(j < self.N, j, j - 2 * self.N) * self.dx

    @property
    def samples_hat(self) -> np.ndarray:
        if self._samples_hat is None:
            object.__setattr__(self, "_samples_hat", np.fft.rfft(self.samples))
        return self._samples_hat

    @classmethod
    def zero(cls, grid) -> "SmoothedKernel":
        """Identically vanishing kernel, for degenerate runs."""
        return cls(coeffs=np.zeros(1), samples=np.zeros(grid.ring_size), mode="zero",
                   l1_discrete=0.0, P=grid.P, M=1, N=grid.N, kernel_l1=0.0, tail_integral=0.0)


def _trig_samples(coeffs: np.ndarray, M: int, N: int) -> np.ndarray:
    """Evaluate sum_{|m|<M} c_m exp(i pi m j / N) at j = 0..2N-1."""
    ring = 2 * N
    m = np.arange(-(M - 1), M)
    if ring >= 2 * M - 1:
        padded = np.zeros(ring, dtype=complex)
        padded[m % ring] = coeffs
        return (np.fft.ifft(padded) * ring).real
    j = np.arange(ring)
    phase = np.exp(1j * np.pi * np.outer(j, m) / N)
    return (phase @ coeffs).real


def _fejer2m_cell_averages(M: int, P: float, N: int) -> np.ndarray:
    """Cell averages of F_{2M} over [(j - 1/2)dx, (j + 1/2)dx], j = 0..2N-1."""
    dx = P / N
    m = np.arange(1, 2 * M)
    weight = (1.0 - m / (2.0 * M)) * np.sinc(m * dx / (2.0 * P))
    j = np.arange(2 * N)
    return 1.0 + 2.0 * np.cos(np.pi * np.outer(j, m) / N) @ weight


def _kernel_cell_averages(spec: KernelSpec, P: float, N: int) -> np.ndarray:
    """Cell averages of the 2P-periodic K^P centred at lags j*dx."""
    dx = P / N
    j = np.arange(2 * N)
    centre = np.where(j <= N, j, j - 2 * N) * dx
    lo = spec.antiderivative(centre - dx / 2)
    hi = spec.antiderivative(np.minimum(centre + dx / 2, P))
    integral = hi - lo
    # The cell at lag P straddles the periodization seam; K even => mirror the half cell.
    integral[N] = 2.0 * (spec.antiderivative(P) - spec.antiderivative(P - dx / 2))
    return integral / dx


def build_smoothed_kernel(spec: KernelSpec, params: PeriodizationParams, grid,
                          mode: Mode = "cesaro") -> SmoothedKernel:
    """Sample sigma^P_M on the lags of ``grid``.

    ``cesaro`` evaluates the trigonometric polynomial exactly; ``cell_average``
    convolves cell averages of the corrected kernel with point values of F_M.
    """
    P, M, N = params.P, params.M, grid.N
    if abs(grid.P - P) > 1e-12 * P:
        raise ValueError("grid and periodization use different P")
    if N < M:
        raise KernelError(f"N >= M required (N={N}, M={M})")

    c_KP = fourier_coeffs_periodized(spec, params, M, base_points=2 * N)
    coeffs = cesaro_coefficients(c_KP, params)
    dx = grid.dx

    if mode == "cesaro":
        samples = _trig_samples(coeffs, M, N)
    elif mode == "cell_average":
        cells = (_kernel_cell_averages(spec, P, N)
                 - (2.0 / P) * params.tail_integral * _fejer2m_cell_averages(M, P, N))
        lag = np.arange(2 * N) * dx
        fejer = fejer_eval(M, P, lag)
        # sigma_j = (1/2P) sum_i dx F_M(x_{j-i}) K_i : circular convolution
        samples = np.fft.irfft(np.fft.rfft(fejer) * np.fft.rfft(cells), n=2 * N) * dx / (2.0 * P)
    else:
        raise ValueError(f"unknown smoothing mode {mode!r}")

    k_l1 = kernel_l1_norm(spec)
    l1 = float(dx * np.abs(samples).sum())
    if l1 > 5.0 * k_l1 + L1_BOUND_SLACK:
        raise KernelError(f"discrete L1 bound violated: {l1:.6g} > 5*{k_l1:.6g}")
    return SmoothedKernel(coeffs=coeffs, samples=samples, mode=mode, l1_discrete=l1,
                          P=P, M=M, N=N, kernel_l1=k_l1, tail_integral=params.tail_integral)
