"""Semi-explicit upwind scheme for the periodic nonlocal eikonal equation.

One step solves, for the unknown u^{n+1},

    (u^{n+1}_i - u^n_i)/dt = lam_i^+ theta^n_{i+1/2} - lam_i^- theta^n_{i-1/2} + L^P lam_i,
    lam_i = sum_j dx sigma_j u^{n+1}_{i-j},

by Banach iteration started from u^n.  The velocity is implicit, the
gradient explicit.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .grid import POSITIVITY_SLACK, Grid, State, discrete_gradient, shift_next, shift_prev
from .kernel import SmoothedKernel

# Slack on the step identities and the per-step TV bound.
IDENTITY_TOL = 1e-10
BOUND_SLACK = 1e-9
ADAPTIVE_SAFETY = 0.9
MAX_HALVINGS = 10


class SchemeError(RuntimeError):
    pass


class FixedPointError(SchemeError):
    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


class BoundViolation(AssertionError):
    """A bound proved for the scheme failed at runtime; ``bound`` names it."""

    def __init__(self, bound: str, message: str):
        super().__init__(f"[{bound}] {message}")
        self.bound = bound


class CFLViolation(SchemeError):
    pass


@dataclass
class SchemeConfig:
    dt: float = 0.02
    T: float = 1400.0
    fixed_point_tol: float = 1e-12
    fixed_point_max_iter: int = 200
    cfl_mode: str = "practical"
    time_mode: str = "uniform"
    velocity_mode: str = "fft"
    positivity_slack: float = POSITIVITY_SLACK
    identity_tol: float = IDENTITY_TOL

    def __post_init__(self):
        if not self.dt > 0 or not self.T > 0:
            raise ValueError("dt and T must be positive")
        if self.dt > self.T:
            raise ValueError("dt must not exceed T")
        if not self.fixed_point_tol > 0 or self.fixed_point_max_iter < 1:
            raise ValueError("fixed-point tolerance and iteration cap must be positive")
        if self.cfl_mode not in ("strict_paper", "practical", "off"):
            raise ValueError(f"unknown cfl_mode {self.cfl_mode!r}")
        if self.time_mode not in ("uniform", "adaptive"):
            raise ValueError(f"unknown time_mode {self.time_mode!r}")
        if self.velocity_mode not in ("fft", "direct"):
            raise ValueError(f"unknown velocity_mode {self.velocity_mode!r}")

    @property
    def n_steps(self) -> int:
        n = round(self.T / self.dt)
        if n < 1 or abs(n * self.dt - self.T) > 1e-9 * self.T:
            raise ValueError(f"T={self.T} is not an integer multiple of dt={self.dt}")
        return n


@dataclass
class StepStats:
    iterations: int
    residual: float
    contraction: float
    scheme_residual: float
    dt: float
    converged: bool = True
    halvings: int = 0
    velocity: np.ndarray | None = field(default=None, repr=False)


def circulant(samples: np.ndarray) -> np.ndarray:
    """Matrix S with S[i, k] = samples[(i - k) mod n]."""
    n = samples.size
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return samples[idx]


class Convolver:
    """lam_i[v] = sum_j dx sigma_j v_{i-j} on the ring, by FFT or dense product."""

    def __init__(self, kernel: SmoothedKernel, grid: Grid, mode: str = "fft"):
        if kernel.samples.size != grid.ring_size:
            raise ValueError("kernel samples do not match the grid ring")
        self.n = grid.ring_size
        self.dx = grid.dx
        self.mode = mode
        if mode == "fft":
            self._hat = kernel.samples_hat * grid.dx
        elif mode == "direct":
            self._matrix = circulant(kernel.samples) * grid.dx
        else:
            raise ValueError(f"unknown velocity mode {mode!r}")

    def __call__(self, v: np.ndarray) -> np.ndarray:
        if v.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}, got shape {v.shape}")
        if self.mode == "fft":
            return np.fft.irfft(np.fft.rfft(v) * self._hat, n=self.n)
        return self._matrix @ v


def velocity(v, kernel: SmoothedKernel, grid: Grid, mode: str = "fft") -> np.ndarray:
    return Convolver(kernel, grid, mode)(np.asarray(v, dtype=float))


def _growth(L_P, T, k_l1):
    expo = 10.0 * L_P * T * k_l1
    return math.exp(expo) if expo < 700 else math.inf


def theoretical_cfl(L_P: float, u0_sup: float, kernel_l1: float, T: float):
    """Right-hand sides of the uniform CFL conditions: (dt_max, (dt/dx)_max).

    ``dt_max`` is +inf when L^P = 0; both are +inf for a vanishing kernel.
    """
    E = _growth(L_P, T, kernel_l1)
    alpha = u0_sup * E
    if kernel_l1 == 0:
        return math.inf, math.inf
    if L_P == 0:
        dt_max = math.inf
    else:
        dt_max = min(1.0 / (alpha + 1.0), 1.0) / (10.0 * L_P * kernel_l1)
    third = 1.0 / (3.0 * alpha) if alpha > 0 else math.inf
    ratio_max = min(1.0 / (alpha + 1.0), third) / (10.0 * kernel_l1)
    return dt_max, ratio_max


def adaptive_bounds(L_P: float, u_sup: float, kernel_l1: float):
    """Per-step bounds (dt, dt/dx) of the adaptive strategy, nonincreasing in ||u||."""
    if kernel_l1 == 0:
        return math.inf, math.inf
    denom = 10.0 * kernel_l1 * (u_sup + 1.0)
    return (math.inf if L_P == 0 else 1.0 / (L_P * denom)), 1.0 / denom


def check_cfl(config: SchemeConfig, initial: State, kernel: SmoothedKernel, grid: Grid):
    if config.cfl_mode == "off":
        return
    dt_max, ratio_max = theoretical_cfl(initial.L_P, initial.sup_norm, kernel.kernel_l1, config.T)
    ok = config.dt < dt_max and config.dt / grid.dx < ratio_max
    if ok:
        return
    msg = (f"dt={config.dt:g}, dt/dx={config.dt / grid.dx:g} outside the uniform CFL "
           f"bounds dt<{dt_max:.3e}, dt/dx<{ratio_max:.3e}")
    if config.cfl_mode == "strict_paper":
        raise CFLViolation(msg)
    warnings.warn(msg + "; continuing on per-step fixed-point convergence", stacklevel=3)


def scheme_rhs(u_old, lam, dx, L_P):
    theta = discrete_gradient(u_old, dx)
    return np.maximum(lam, 0.0) * theta + np.minimum(lam, 0.0) * shift_prev(theta) + L_P * lam


def fixed_point_step(state: State, conv: Convolver, grid: Grid, config: SchemeConfig,
                     dt: float | None = None) -> tuple[State, StepStats]:
    """Advance one step by fixed-point iteration on F(v).

    Raises FixedPointError when the increment does not drop below
    ``config.fixed_point_tol`` within ``config.fixed_point_max_iter`` iterations.
    """
    dt = config.dt if dt is None else dt
    u = state.u
    r = dt / grid.dx
    d_fwd = shift_next(u) - u
    d_bwd = u - shift_prev(u)
    tL = dt * state.L_P
    tol = config.fixed_point_tol

    v = u
    prev_inc = None
    inc = math.inf
    contraction = 0.0
    it = 0
    for it in range(1, config.fixed_point_max_iter + 1):
        lam = conv(v)
        new = u + r * (np.maximum(lam, 0.0) * d_fwd + np.minimum(lam, 0.0) * d_bwd) + tL * lam
        inc = float(np.max(np.abs(new - v)))
        if prev_inc is not None and prev_inc > 0:
            contraction = inc / prev_inc
        prev_inc = inc
        v = new
        if inc < tol or not np.isfinite(inc):
            break

    if not (inc < tol):
        stats = StepStats(it, inc, contraction, math.nan, dt, converged=False)
        raise FixedPointError(f"fixed point did not converge at step {state.n + 1} "
                              f"(increment {inc:.3e} after {it} iterations)", stats)

    lam = conv(v)
    res = (v - u) / dt - scheme_rhs(u, lam, grid.dx, state.L_P)
    stats = StepStats(iterations=it, residual=inc, contraction=contraction,
                      scheme_residual=float(np.max(np.abs(res))), dt=dt, velocity=lam)
    return state.advanced(v, dt), stats


Hook = Callable[[State, State, StepStats], None]


def _run_hooks(hooks: Iterable[Hook], prev: State, new: State, stats: StepStats):
    for hook in hooks:
        hook(prev, new, stats)


class BoundGuard:
    """Runtime assertions of the uniform-in-time estimates of the scheme."""

    def __init__(self, initial: State, grid: Grid, kernel: SmoothedKernel, T: float,
                 slack: float = POSITIVITY_SLACK, fixed_point_tol: float = 1e-12):
        self.grid = grid
        self.slack = slack
        self.tol = fixed_point_tol
        growth = _growth(initial.L_P, T, kernel.kernel_l1)
        self.sup_bound = initial.sup_norm * growth + BOUND_SLACK
        tv0 = float(np.abs(np.diff(np.append(initial.u, initial.u[0]))).sum())
        self.tv_bound = tv0 * growth + BOUND_SLACK

    def __call__(self, prev: State, new: State, stats: StepStats):
        density = discrete_gradient(new.u, self.grid.dx) + new.L_P
        low = float(density.min())
        if low < -self.slack:
            raise BoundViolation("positivity", f"min(theta+L^P) = {low:.3e} at step {new.n}")
        if new.sup_norm > self.sup_bound:
            raise BoundViolation("linf", f"||u||={new.sup_norm:.6g} > {self.sup_bound:.6g} at step {new.n}")
        tv = float(np.abs(shift_next(new.u) - new.u).sum())
        if tv > self.tv_bound:
            raise BoundViolation("tv", f"TV={tv:.6g} > {self.tv_bound:.6g} at step {new.n}")
        if not stats.contraction < 1.0:
            raise BoundViolation("contraction", f"empirical contraction {stats.contraction:.3g} at step {new.n}")
        if stats.scheme_residual > 10.0 * self.tol / stats.dt:
            raise BoundViolation("scheme-residual", f"{stats.scheme_residual:.3e} at step {new.n}")


def advance_uniform(initial: State, kernel: SmoothedKernel, grid: Grid, config: SchemeConfig,
                    hooks: Sequence[Hook] = (), guard: bool = True) -> State:
    """Run round(T/dt) uniform steps, calling each hook after every step."""
    n_steps = config.n_steps
    check_cfl(config, initial, kernel, grid)
    conv = Convolver(kernel, grid, config.velocity_mode)
    all_hooks = list(hooks)
    if guard:
        all_hooks.insert(0, BoundGuard(initial, grid, kernel, config.T,
                                             config.positivity_slack, config.fixed_point_tol))
    state = initial
    for _ in range(n_steps - initial.n):
        new, stats = fixed_point_step(state, conv, grid, config)
        new = State(n=new.n, t=new.n * config.dt, u=new.u, L_P=new.L_P)
        _run_hooks(all_hooks, state, new, stats)
        state = new
    return state


def advance_adaptive(initial: State, kernel: SmoothedKernel, grid: Grid, config: SchemeConfig,
                     hooks: Sequence[Hook] = ()) -> State:
    """Adaptive time stepping driven by the current sup norm.

    dt_{n+1} = min(dt_n, 0.9 * bound_dt(u^n), 0.9 * dx * bound_ratio(u^n)); the
    step is halved and retried when the fixed point fails, at most 10 times.
    """
    L_P = initial.L_P
    k_l1 = kernel.kernel_l1
    if L_P > 0 and k_l1 > 0 and not config.dt < 1.0 / (10.0 * L_P * k_l1):
        raise CFLViolation(f"initial dt={config.dt} must be below 1/(10 L^P ||K||_1)")
    conv = Convolver(kernel, grid, config.velocity_mode)
    slack = config.positivity_slack
    state = initial
    dt = config.dt
    while state.t < config.T * (1 - 1e-14):
        b_dt, b_ratio = adaptive_bounds(L_P, state.sup_norm, k_l1)
        dt = min(dt, ADAPTIVE_SAFETY * b_dt, ADAPTIVE_SAFETY * grid.dx * b_ratio)
        trial = min(dt, config.T - state.t)
        halvings = 0
        while True:
            try:
                new, stats = fixed_point_step(state, conv, grid, config, dt=trial)
                break
            except FixedPointError:
                halvings += 1
                if halvings > MAX_HALVINGS:
                    raise
                trial /= 2.0
                dt = trial
        stats.halvings = halvings
        if new.sup_norm > 2.0 * state.sup_norm + BOUND_SLACK:
            raise BoundViolation("linf-adaptive", f"||u^(n+1)||={new.sup_norm:.6g} > 2||u^n||")
        low = float((discrete_gradient(new.u, grid.dx) + L_P).min())
        if low < -slack:
            raise BoundViolation("positivity", f"min(theta+L^P) = {low:.3e} at step {new.n}")
        if trial >= config.T - state.t:
            new = State(n=new.n, t=config.T, u=new.u, L_P=new.L_P)
        _run_hooks(hooks, state, new, stats)
        state = new
    return state


def advance(initial: State, kernel: SmoothedKernel, grid: Grid, config: SchemeConfig,
            hooks: Sequence[Hook] = ()) -> State:
    if config.time_mode == "adaptive":
        return advance_adaptive(initial, kernel, grid, config, hooks)
    return advance_uniform(initial, kernel, grid, config, hooks)


class Recorder:
    """Hook keeping every k-th state (and always the first and last seen)."""

    def __init__(self, every: int = 1):
        self.every = max(int(every), 1)
        self.states: list[State] = []

    def __call__(self, prev: State, new: State, stats: StepStats):
        if not self.states:
            self.states.append(prev)
        if new.n % self.every == 0:
            self.states.append(new)
        self._last = new

    def finish(self) -> list[State]:
        last = getattr(self, "_last", None)
        if last is not None and self.states[-1] is not last:
            self.states.append(last)
        return self.states


def q1_reconstruct(states: Sequence[State], grid: Grid, x, t) -> np.ndarray:
    """Bilinear space-time interpolation of stored states at (x, t).

    ``states`` must be ordered in time; ``x`` is wrapped into [-P, P).
    """
    times = np.array([s.t for s in states])
    t = float(t)
    if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
        raise ValueError(f"t={t} outside the stored interval [{times[0]}, {times[-1]}]")
    n = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2)) if len(times) > 1 else 0
    if len(times) == 1:
        wt, u_lo, u_hi = 0.0, states[0].u, states[0].u
    else:
        wt = (t - times[n]) / (times[n + 1] - times[n])
        u_lo, u_hi = states[n].u, states[n + 1].u

    x = grid.wrap_x(x)
    s = (x + grid.P) / grid.dx
    i = np.floor(s).astype(int)
    wx = s - i
    i = grid.wrap(i)
    j = grid.wrap(i + 1)
    lo = (1 - wx) * u_lo[i] + wx * u_lo[j]
    hi = (1 - wx) * u_hi[i] + wx * u_hi[j]
    out = wt * hi + (1 - wt) * lo
    return out if np.ndim(out) else float(out)
