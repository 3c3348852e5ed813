"""Periodic ring grid, initial profiles and the periodic projection of v0."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

# Tolerated negative slack on theta + L^P produced by rounding.
POSITIVITY_SLACK = 1e-12


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Ring of 2N nodes x_i = -P + i*dx, dx = P/N."""

    P: float
    N: int

    def __post_init__(self):
        if self.P < 1:
            raise ValueError(f"P must be >= 1, got {self.P}")
        if self.N < 1:
            raise ValueError(f"N must be positive, got {self.N}")

    @property
    def dx(self) -> float:
        return self.P / self.N

    @property
    def ring_size(self) -> int:
        return 2 * self.N

    @property
    def x(self) -> np.ndarray:
        return -self.P + self.dx * np.arange(self.ring_size)

    def wrap(self, i):
        return np.mod(i, self.ring_size)

    def wrap_x(self, x):
        """Map positions into [-P, P)."""
        return np.mod(np.asarray(x, dtype=float) + self.P, 2 * self.P) - self.P


@dataclass(frozen=True)
class InitialProfile:
    """Nondecreasing bounded initial datum v0.

    ``kind='arctan'`` is v0(x) = (2/pi) atan(x) + 1; ``kind='user_table'``
    interpolates a sorted (x, v0) table linearly, clamped outside its range.
    """

    kind: str = "arctan"
    table_x: tuple = ()
    table_v: tuple = ()

    def __post_init__(self):
        if self.kind == "arctan":
            return
        if self.kind != "user_table":
            raise ProfileError(f"unknown profile kind {self.kind!r}")
        xs = np.asarray(self.table_x, dtype=float)
        vs = np.asarray(self.table_v, dtype=float)
        if xs.size < 2 or xs.shape != vs.shape:
            raise ProfileError("table needs at least two (x, v0) pairs of equal length")
        if np.any(np.diff(xs) <= 0):
            raise ProfileError("table x must be strictly increasing")
        if np.any(np.diff(vs) < 0):
            raise ProfileError("table v0 must be nondecreasing")
        if not np.all(np.isfinite(vs)):
            raise ProfileError("table v0 must be finite")

    @classmethod
    def from_table(cls, x, v) -> "InitialProfile":
        return cls("user_table", tuple(map(float, x)), tuple(map(float, v)))

    @classmethod
    def from_csv(cls, path) -> "InitialProfile":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        try:
            pairs = [(float(a), float(b)) for a, b in rows]
        except ValueError:
            # header row
            pairs = [(float(a), float(b)) for a, b in rows[1:]]
        xs, vs = zip(*pairs)
        return cls.from_table(xs, vs)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "arctan":
            return 2.0 / np.pi * np.arctan(x) + 1.0
        return np.interp(x, self.table_x, self.table_v)

    @property
    def sup_norm(self) -> float:
        if self.kind == "arctan":
            return 2.0
        return float(np.max(np.abs(self.table_v)))


def slope_LP(profile: InitialProfile, P: float) -> float:
    if P <= 0:
        raise ValueError("P must be positive")
    return float((profile(P) - profile(-P)) / (2.0 * P))


@dataclass(frozen=True)
class State:
    """Discrete solution u^{P,n} on the ring at time t."""

    n: int
    t: float
    u: np.ndarray = field(repr=False)
    L_P: float

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    def advanced(self, u, dt) -> "State":
        return replace(self, n=self.n + 1, t=self.t + dt, u=u)

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.u)))

    def save(self, path) -> None:
        np.savez(path, u=self.u, n=self.n, t=self.t, L_P=self.L_P)

    @classmethod
    def load(cls, path) -> "State":
        with np.load(path) as data:
            return cls(n=int(data["n"]), t=float(data["t"]), u=data["u"].copy(),
                       L_P=float(data["L_P"]))


def shift_next(a: np.ndarray) -> np.ndarray:
    """a_{i+1} on the ring (np.roll(a, -1), cheaper for short vectors)."""
    return np.concatenate((a[1:], a[:1]))


def shift_prev(a: np.ndarray) -> np.ndarray:
    """a_{i-1} on the ring."""
    return np.concatenate((a[-1:], a[:-1]))


def discrete_gradient(u, dx: float) -> np.ndarray:
    """theta_{i+1/2} = (u_{i+1} - u_i)/dx with circular wrap."""
    u = np.asarray(getattr(u, "u", u))
    return (shift_next(u) - u) / dx


def project_initial(profile: InitialProfile, grid: Grid) -> State:
    """u_i = v0(x_i) - L^P x_i; rejects data whose density goes negative."""
    L_P = slope_LP(profile, grid.P)
    x = grid.x
    u = profile(x) - L_P * x
    density = discrete_gradient(u, grid.dx) + L_P
    if density.min() < -POSITIVITY_SLACK:
        raise ProfileError(f"projected density negative (min {density.min():.3e})")
    return State(n=0, t=0.0, u=u, L_P=L_P)


def load_profile_csv(path: str | Path) -> InitialProfile:
    return InitialProfile.from_csv(path)
