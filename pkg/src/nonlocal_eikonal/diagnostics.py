"""Discrete estimates of the scheme: entropy, total variation, sign checks, L log L.

``StepMonitor`` is the hook that recomputes every per-step estimate during a
run and records one ``DiagnosticsRecord`` per step.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .grid import POSITIVITY_SLACK, Grid, State, discrete_gradient, shift_next, shift_prev
from .kernel import SmoothedKernel
from .scheme import BOUND_SLACK, IDENTITY_TOL, BoundViolation, StepStats, q1_reconstruct

INV_E = math.exp(-1.0)
ENTROPY_CONST = 1.0 / (math.e * math.log(2.0))


def entropy_f(x):
    """f(x) = x ln x + 1/e for x >= 1/e, 0 on [0, 1/e]."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("entropy density is defined on x >= 0")
    safe = np.where(x > INV_E, x, 1.0)
    out = np.where(x > INV_E, safe * np.log(safe) + INV_E, 0.0)
    return out if out.ndim else float(out)


def density(state, grid: Grid, slack: float = POSITIVITY_SLACK) -> np.ndarray:
    """theta + L^P with rounding-level negatives clamped to 0."""
    d = discrete_gradient(state.u, grid.dx) + state.L_P
    return np.where((d < 0) & (d >= -slack), 0.0, d)


def discrete_entropy(state, grid: Grid) -> float:
    return float(grid.dx * entropy_f(density(state, grid)).sum())


def total_variation(u) -> float:
    u = np.asarray(getattr(u, "u", u))
    return float(np.abs(shift_next(u) - u).sum())


def growth_factor(L_P: float, T: float, kernel_l1: float) -> float:
    expo = 10.0 * L_P * T * kernel_l1
    return math.exp(expo) if expo < 700 else math.inf


def zeta_per_run(T: float, kernel_l1: float, L_P: float) -> float:
    """Entropy constant with the run's own slope L^P."""
    if T == 0:
        return 0.0
    return 5.0 * T * kernel_l1 * growth_factor(L_P, T, kernel_l1) * (ENTROPY_CONST + L_P)


def zeta_bound(v0_sup: float, T: float, kernel_l1: float) -> float:
    """Worst-case entropy constant, uniform in P >= 1 (slope replaced by ||v0||_inf)."""
    return zeta_per_run(T, kernel_l1, v0_sup)


def entropy_step_increment(dt: float, kernel_l1: float, L_P: float, T: float, tv0: float) -> float:
    return 5.0 * dt * kernel_l1 * growth_factor(L_P, T, kernel_l1) * tv0 * (ENTROPY_CONST + L_P)


@dataclass
class DFTSignReport:
    max_real: float
    max_imag: float
    coefficients: np.ndarray = field(repr=False)
    tol: float = 1e-12

    @property
    def passed(self) -> bool:
        return self.max_real <= self.tol and self.max_imag <= self.tol


def dft_sign_check(samples, tol: float = 1e-12) -> DFTSignReport:
    """c^d_j = (1/2N) sum_l sigma_l exp(-i pi j l / N); all must be real and <= 0."""
    samples = np.asarray(getattr(samples, "samples", samples), dtype=float)
    c = np.fft.fft(samples) / samples.size
    return DFTSignReport(max_real=float(c.real.max()), max_imag=float(np.abs(c.imag).max()),
                         coefficients=c, tol=tol)


def zygmund_norm(w, dx: float, rtol: float = 1e-8) -> float:
    """L log L norm: the mu solving sum dx (w/mu) ln(e + w/mu) = 1.

    The left side is strictly decreasing in mu.  w is scaled by its maximum
    and the root is bracketed in log(mu), which keeps subnormal or huge
    inputs well conditioned.
    """
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("zygmund_norm expects a nonnegative function")
    scale = float(w.max()) if w.size else 0.0
    if not scale > 0:
        return 0.0
    w = w / scale

    def excess(y):
        r = w * math.exp(-y)
        return dx * float(np.sum(r * np.log(math.e + r))) - 1.0

    lo, hi = 0.0, 0.0
    while excess(hi) > 0:
        hi += 1.0
    while excess(lo) < 0:
        lo -= 1.0
    y = brentq(excess, lo, hi, xtol=rtol * 1e-2, rtol=4 * np.finfo(float).eps)
    return scale * math.exp(y)


@dataclass
class LemmaA1Report:
    entropy_integral: float
    zygmund: float
    l1: float
    upper_entropy: float
    upper_zygmund: float

    @property
    def entropy_ok(self) -> bool:
        return self.entropy_integral <= self.upper_entropy * (1 + 1e-12) + 1e-12

    @property
    def zygmund_ok(self) -> bool:
        return self.zygmund <= self.upper_zygmund * (1 + 1e-12) + 1e-12

    @property
    def passed(self) -> bool:
        return self.entropy_ok and self.zygmund_ok


def lemma_a1_check(w, dx: float) -> LemmaA1Report:
    """Check both L log L inequalities for a sampled nonnegative w (midpoint sums)."""
    w = np.asarray(w, dtype=float)
    ent = float(dx * entropy_f(w).sum())
    z = zygmund_norm(w, dx)
    l1 = float(dx * np.abs(w).sum())
    return LemmaA1Report(
        entropy_integral=ent, zygmund=z, l1=l1,
        upper_entropy=1.0 + z + l1 * math.log1p(z),
        upper_zygmund=1.0 + l1 * math.log(1.0 + math.e**2) + ent,
    )


def modulus_omega(gamma: float, h: float) -> float:
    def part(s):
        return 0.0 if s == 0 else 1.0 / math.log1p(1.0 / s)
    return part(gamma) + part(h)


def modulus_probe(states, grid: Grid, gamma: float, h: float, n_times: int = 16) -> float:
    """sup |u(x+gamma, t+h) - u(x, t)| / omega(gamma, h) over grid nodes and sampled t."""
    if gamma <= 0 or h <= 0:
        raise ValueError("gamma and h must be positive")
    if len(states) < 2:
        raise ValueError("need at least two snapshots")
    t0, t1 = states[0].t, states[-1].t
    if t1 - t0 < h:
        raise ValueError("snapshots do not cover an interval of length h")
    x = grid.x
    worst = 0.0
    for t in np.linspace(t0, t1 - h, n_times):
        a = q1_reconstruct(states, grid, x, t)
        b = q1_reconstruct(states, grid, x + gamma, t + h)
        worst = max(worst, float(np.max(np.abs(b - a))))
    return worst / modulus_omega(gamma, h)


@dataclass
class DiagnosticsRecord:
    n: int
    t: float
    tv: float
    entropy: float
    sup_norm: float
    min_grad: float
    fp_iters: int
    contraction: float
    violations: list = field(default_factory=list)

    def row(self) -> dict:
        d = asdict(self)
        d["violations"] = ";".join(self.violations)
        return d


CSV_COLUMNS = ("n", "t", "tv", "entropy", "sup_norm", "min_grad", "fp_iters", "contraction")


def convex_combination_residual(u_old, u_new, lam, dt, dx, L_P) -> float:
    """Max deviation of theta^{n+1}+L from a1(.)_{i+3/2} + a2(.)_{i-1/2} + a3(.)_{i+1/2}."""
    r = dt / dx
    d_old = discrete_gradient(u_old, dx) + L_P
    d_new = discrete_gradient(u_new, dx) + L_P
    lp, lm = np.maximum(lam, 0.0), np.maximum(-lam, 0.0)
    lp_next, lm_next = shift_next(lp), shift_next(lm)
    a1 = r * lp_next
    a2 = r * lm
    a3 = 1.0 - r * (lp + lm_next)
    rebuilt = a1 * shift_next(d_old) + a2 * shift_prev(d_old) + a3 * d_old
    return float(np.max(np.abs(d_new - rebuilt)))


def tau_identity_residual(u_old, u_new, lam, dt, dx, L_P) -> float:
    d_old = discrete_gradient(u_old, dx) + L_P
    rhs = np.maximum(lam, 0.0) * d_old - np.maximum(-lam, 0.0) * shift_prev(d_old)
    return float(np.max(np.abs((u_new - u_old) / dt - rhs)))


class StepMonitor:
    """Per-step hook checking every discrete estimate of the scheme.

    Bounds: positivity, L-infinity, total variation (global and per step),
    entropy (per step and cumulative with the per-run constant), velocity
    bound, step identities.  Violations are recorded; with ``strict`` they
    raise ``BoundViolation``.
    """

    def __init__(self, initial: State, grid: Grid, kernel: SmoothedKernel, T: float,
                 strict: bool = True, identities: bool = True, fixed_point_tol: float = 1e-12):
        self.grid = grid
        self.kernel = kernel
        self.T = T
        self.strict = strict
        self.identities = identities
        self.tol = fixed_point_tol
        self.k_l1 = kernel.kernel_l1
        self.L_P = initial.L_P
        self.growth = growth_factor(self.L_P, T, self.k_l1)
        self.tv0 = total_variation(initial)
        self.sup0 = initial.sup_norm
        self.entropy0 = discrete_entropy(initial, grid)
        self.zeta = zeta_per_run(T, self.k_l1, self.L_P)
        self.records = [self._record(initial, None)]
        self.max_identity = 0.0
        self.max_tau = 0.0
        self.max_scheme_residual = 0.0

    def _record(self, state, stats):
        d = discrete_gradient(state.u, self.grid.dx) + state.L_P
        return DiagnosticsRecord(
            n=state.n, t=state.t, tv=total_variation(state),
            # undefined once the density goes negative; positivity is flagged instead
            entropy=discrete_entropy(state, self.grid) if d.min() >= -POSITIVITY_SLACK else math.nan,
            sup_norm=state.sup_norm, min_grad=float(d.min()),
            fp_iters=0 if stats is None else stats.iterations,
            contraction=0.0 if stats is None else stats.contraction)

    def _flag(self, rec, name, message):
        rec.violations.append(name)
        if self.strict:
            raise BoundViolation(name, message)

    def __call__(self, prev: State, new: State, stats: StepStats):
        rec = self._record(new, stats)
        last = self.records[-1]
        dt, dx = stats.dt, self.grid.dx

        if rec.min_grad < -POSITIVITY_SLACK:
            self._flag(rec, "positivity", f"min(theta+L)={rec.min_grad:.3e} at n={new.n}")
        if rec.sup_norm > self.sup0 * self.growth + BOUND_SLACK:
            self._flag(rec, "linf", f"||u||={rec.sup_norm:.6g} at n={new.n}")
        if rec.tv > self.tv0 * self.growth + BOUND_SLACK:
            self._flag(rec, "tv", f"TV={rec.tv:.6g} at n={new.n}")
        if rec.tv * (1.0 - 5.0 * self.L_P * dt * self.k_l1) > last.tv + 1e-10:
            self._flag(rec, "tv-step", f"TV {last.tv:.12g} -> {rec.tv:.12g} at n={new.n}")
        inc = entropy_step_increment(dt, self.k_l1, self.L_P, self.T, self.tv0)
        if rec.entropy - last.entropy > inc + BOUND_SLACK:
            self._flag(rec, "entropy-step", f"increment {rec.entropy - last.entropy:.3e} > {inc:.3e}")
        if rec.entropy > self.entropy0 + self.zeta * self.tv0 + BOUND_SLACK:
            self._flag(rec, "entropy", f"entropy {rec.entropy:.6g} above cumulative bound")

        lam = stats.velocity
        if lam is not None:
            if np.max(np.abs(lam)) > 5.0 * self.k_l1 * rec.sup_norm + BOUND_SLACK:
                self._flag(rec, "velocity", f"max|lam|={np.max(np.abs(lam)):.6g} at n={new.n}")
            if self.identities:
                cc = convex_combination_residual(prev.u, new.u, lam, dt, dx, self.L_P)
                tau = tau_identity_residual(prev.u, new.u, lam, dt, dx, self.L_P)
                self.max_identity = max(self.max_identity, cc)
                self.max_tau = max(self.max_tau, tau)
                if cc > IDENTITY_TOL:
                    self._flag(rec, "convex-combination", f"residual {cc:.3e} at n={new.n}")
                if tau > IDENTITY_TOL:
                    self._flag(rec, "tau-identity", f"residual {tau:.3e} at n={new.n}")
        self.max_scheme_residual = max(self.max_scheme_residual, stats.scheme_residual)
        if stats.scheme_residual > 10.0 * self.tol / dt:
            self._flag(rec, "scheme-residual", f"{stats.scheme_residual:.3e} at n={new.n}")
        self.records.append(rec)

    @property
    def violations(self) -> list:
        return [(r.n, v) for r in self.records for v in r.violations]
