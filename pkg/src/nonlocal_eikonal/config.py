"""Run configuration: JSON document <-> validated nested dataclasses."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

from .grid import Grid, InitialProfile, project_initial
from .kernel import KernelSpec, PeriodizationParams, build_smoothed_kernel, kernel_l1_norm
from .scheme import SchemeConfig


class ConfigError(ValueError):
    """Carries every violation found, each prefixed by its key path."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class KernelSection:
    amplitude: float = 1.0
    zeta: float = 1.0


@dataclass
class DomainSection:
    P: float = 50.0
    N: int = 500


@dataclass
class SmoothingSection:
    M: int = 400
    mode: str = "cesaro"
    quadrature_oversample: int = 16


@dataclass
class TimeSection:
    dt: float = 0.02
    T: float = 1400.0
    time_mode: str = "uniform"


@dataclass
class SolverSection:
    fixed_point_tol: float = 1e-12
    max_iter: int = 200
    cfl_mode: str = "practical"
    velocity_mode: str = "fft"


@dataclass
class OutputSection:
    every_k_steps: int = 7000
    dir: str = "runs/simulate"


@dataclass
class ProfileSection:
    kind: str = "arctan"
    table: str = ""


@dataclass
class RunConfig:
    kernel: KernelSection = field(default_factory=KernelSection)
    domain: DomainSection = field(default_factory=DomainSection)
    smoothing: SmoothingSection = field(default_factory=SmoothingSection)
    time: TimeSection = field(default_factory=TimeSection)
    solver: SolverSection = field(default_factory=SolverSection)
    output: OutputSection = field(default_factory=OutputSection)
    profile: ProfileSection = field(default_factory=ProfileSection)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def scheme_config(self) -> SchemeConfig:
        return SchemeConfig(dt=self.time.dt, T=self.time.T,
                            fixed_point_tol=self.solver.fixed_point_tol,
                            fixed_point_max_iter=self.solver.max_iter,
                            cfl_mode=self.solver.cfl_mode, time_mode=self.time.time_mode,
                            velocity_mode=self.solver.velocity_mode)


CHOICES = {
    ("smoothing", "mode"): ("cesaro", "cell_average"),
    ("time", "time_mode"): ("uniform", "adaptive"),
    ("solver", "cfl_mode"): ("strict_paper", "practical", "off"),
    ("solver", "velocity_mode"): ("fft", "direct"),
    ("profile", "kind"): ("arctan", "user_table"),
}


def _coerce(value, typ, path, errors):
    if typ in ("float", float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"{path}: expected a number, got {type(value).__name__}")
            return None
        if not math.isfinite(value):
            errors.append(f"{path}: must be finite")
            return None
        return float(value)
    if typ in ("int", int):
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            errors.append(f"{path}: expected an integer, got {type(value).__name__}")
            return None
        return value
    if not isinstance(value, str):
        errors.append(f"{path}: expected a string, got {type(value).__name__}")
        return None
    return value


def parse_config(document) -> RunConfig:
    """Validate a JSON document (str or dict) into a RunConfig.

    Missing keys take the defaults (the P=50 reference run); unknown keys, type
    mismatches and constraint violations are all collected before raising.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document) if document.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigError([f"<document>: invalid JSON ({exc})"]) from None
    if not isinstance(document, dict):
        raise ConfigError(["<document>: top level must be an object"])

    cfg = RunConfig()
    errors = []
    sections = {f.name: f for f in fields(RunConfig)}
    for name, body in document.items():
        if name not in sections:
            errors.append(f"{name}: unknown key")
            continue
        if not isinstance(body, dict):
            errors.append(f"{name}: expected an object")
            continue
        section = getattr(cfg, name)
        known = {f.name: f for f in fields(section)}
        for key, value in body.items():
            path = f"{name}.{key}"
            if key not in known:
                errors.append(f"{path}: unknown key")
                continue
            coerced = _coerce(value, known[key].type, path, errors)
            if coerced is None:
                continue
            allowed = CHOICES.get((name, key))
            if allowed and coerced not in allowed:
                errors.append(f"{path}: must be one of {', '.join(allowed)}")
                continue
            setattr(section, key, coerced)

    errors.extend(_constraints(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def _constraints(cfg: RunConfig):
    out = []
    k, d, s, t, sv, o = cfg.kernel, cfg.domain, cfg.smoothing, cfg.time, cfg.solver, cfg.output
    if not k.zeta > 0:
        out.append("kernel.zeta: must be > 0")
    if d.P < 1:
        out.append("domain.P: P >= 1 required")
    if k.zeta > 0 and d.P < k.zeta:
        out.append("domain.P: P >= kernel.zeta required")
    if d.N < 1:
        out.append("domain.N: must be positive")
    if s.M < 1:
        out.append("smoothing.M: must be positive")
    if d.N < s.M:
        out.append("domain.N: N >= M required")
    if s.quadrature_oversample < 4:
        out.append("smoothing.quadrature_oversample: must be >= 4")
    if not t.dt > 0:
        out.append("time.dt: must be > 0")
    if not t.T > 0:
        out.append("time.T: must be > 0")
    if t.dt > 0 and t.T > 0:
        if t.dt > t.T:
            out.append("time.dt: dt <= T required")
        elif t.time_mode == "uniform":
            n = round(t.T / t.dt)
            if abs(n * t.dt - t.T) > 1e-9 * t.T:
                out.append("time.T: must be an integer multiple of dt in uniform mode")
    if not sv.fixed_point_tol > 0:
        out.append("solver.fixed_point_tol: must be > 0")
    if sv.max_iter < 1:
        out.append("solver.max_iter: must be >= 1")
    if o.every_k_steps < 1:
        out.append("output.every_k_steps: must be >= 1")
    if cfg.profile.kind == "user_table" and not cfg.profile.table:
        out.append("profile.table: required for kind user_table")
    return out


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def build_problem(cfg: RunConfig):
    """Kernel spec, grid, smoothed kernel, initial state and scheme settings for a run."""
    spec = KernelSpec(cfg.kernel.amplitude, cfg.kernel.zeta)
    grid = Grid(cfg.domain.P, cfg.domain.N)
    params = PeriodizationParams.for_kernel(spec, cfg.domain.P, cfg.smoothing.M,
                                            cfg.smoothing.quadrature_oversample)
    kernel = build_smoothed_kernel(spec, params, grid, cfg.smoothing.mode)
    if cfg.profile.kind == "user_table":
        profile = InitialProfile.from_csv(cfg.profile.table)
    else:
        profile = InitialProfile()
    initial = project_initial(profile, grid)
    return spec, grid, kernel, initial, cfg.scheme_config(), profile


def derived_quantities(cfg: RunConfig, grid: Grid, kernel, initial) -> dict:
    n_steps = round(cfg.time.T / cfg.time.dt) if cfg.time.time_mode == "uniform" else None
    return {
        "dx": grid.dx,
        "ring_size": grid.ring_size,
        "N_T": n_steps,
        "L_P": initial.L_P,
        "kernel_l1": kernel_l1_norm(KernelSpec(cfg.kernel.amplitude, cfg.kernel.zeta)),
        "tail_integral": kernel.tail_integral,
        "l1_discrete": kernel.l1_discrete,
        "max_coeff": kernel.max_coeff,
        "u0_sup": initial.sup_norm,
    }
