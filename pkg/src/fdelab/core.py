"""Parameters, exponents, radial grids and the integral functionals on them.

Everything here is radial: a ball ``B_R`` is a radius measured from the grid
origin, and fields are stored as cell averages on a cell-centered grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.special import gamma


WITH_INVERSE_M = "with-inverse-m"
WITHOUT_INVERSE_M = "without-inverse-m"
EQUATION_FORMS = (WITH_INVERSE_M, WITHOUT_INVERSE_M)


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


class PreconditionError(ValueError):
    """Raised when a parameter range required by a formula is violated."""


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / gamma(d / 2 + 1)


@dataclass(frozen=True)
class FdeParams:
    m: float
    d: int
    equation_form: str = WITH_INVERSE_M

    def __post_init__(self):
        if not self.m < 1:
            raise PreconditionError(f"m must be < 1, got {self.m}")
        if int(self.d) != self.d or self.d < 1:
            raise PreconditionError(f"d must be a positive integer, got {self.d}")
        if self.equation_form not in EQUATION_FORMS:
            raise PreconditionError(f"unknown equation_form {self.equation_form!r}")
        if self.m <= 0 and self.equation_form != WITH_INVERSE_M:
            raise PreconditionError("m <= 0 requires the with-inverse-m form")

    @property
    def m_c(self) -> float:
        return (self.d - 2) / self.d

    def potential(self, u):
        """The function whose Laplacian drives the equation (u^m/m, log u or u^m)."""
        u = np.asarray(u, dtype=float)
        if self.m == 0:
            return np.log(u)
        if self.equation_form == WITH_INVERSE_M:
            return u**self.m / self.m
        return u**self.m

    def with_form(self, form: str) -> "FdeParams":
        return FdeParams(self.m, self.d, form)


def time_factor(params: FdeParams, target_form: str) -> float:
    """Factor ``f`` with ``t_target = f * t`` for the same solution profile.

    ``u_t = Δ(u^m)/m`` and ``u_t = Δ(u^m)`` differ by a constant in front of
    the diffusion, which is a pure change of clock.
    """
    if target_form == params.equation_form:
        return 1.0
    if params.m <= 0:
        raise PreconditionError("the without-inverse-m clock needs m > 0")
    if target_form == WITHOUT_INVERSE_M:
        return 1.0 / params.m
    return params.m


@dataclass(frozen=True)
class Exponents:
    m_c: float
    p_c: float
    theta_p: Optional[float]
    sigma: float
    q: float
    sigma_star: float
    two_star: float


def derive_exponents(params: FdeParams, p: Optional[float] = None) -> Exponents:
    m, d = params.m, params.d
    if p is not None and p < 1:
        raise PreconditionError(f"p must be >= 1, got {p}")
    p_c = d * (1 - m) / 2
    theta = None
    if p is not None and not math.isclose(p, p_c, rel_tol=0, abs_tol=1e-14):
        theta = 1 / (2 * p - d * (1 - m))
    if d >= 3:
        q = d / 2
        sigma_star = d / (d - 2)
        two_star = 2 * d / (d - 2)
    else:
        q = 2.0
        sigma_star = 2.0
        two_star = 4.0
    return Exponents(
        m_c=(d - 2) / d,
        p_c=p_c,
        theta_p=theta,
        sigma=d * (1 - m) - 2,
        q=q,
        sigma_star=sigma_star,
        two_star=two_star,
    )


@dataclass(frozen=True)
class RadialGrid:
    """Cell-centered radial grid; ``radii`` are the cell faces."""

    radii: np.ndarray
    d: int
    shell_volumes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if r.ndim != 1 or r.size < 2 or r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise DomainError("radii must start at 0 and be strictly increasing")
        r.setflags(write=False)
        object.__setattr__(self, "radii", r)
        vol = unit_ball_volume(self.d) * np.diff(r**self.d)
        vol.setflags(write=False)
        object.__setattr__(self, "shell_volumes", vol)

    @classmethod
    def uniform(cls, R_dom: float, n_cells: int, d: int) -> "RadialGrid":
        return cls(np.linspace(0.0, R_dom, n_cells + 1), d)

    @property
    def R_dom(self) -> float:
        return float(self.radii[-1])

    @property
    def n_cells(self) -> int:
        return self.radii.size - 1

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.radii[1:] + self.radii[:-1])

    @property
    def face_areas(self) -> np.ndarray:
        return self.d * unit_ball_volume(self.d) * self.radii ** (self.d - 1)

    def ball_weights(self, R: float) -> np.ndarray:
        """Volume of each cell that lies inside B_R (partial cell split by volume)."""
        if R > self.R_dom * (1 + 1e-12):
            raise DomainError(f"radius {R} exceeds the domain radius {self.R_dom}")
        if R < 0:
            raise DomainError("radius must be nonnegative")
        R = min(R, self.R_dom)
        inner = np.minimum(self.radii[:-1], R)
        outer = np.minimum(self.radii[1:], R)
        return unit_ball_volume(self.d) * (outer**self.d - inner**self.d)


@dataclass(frozen=True)
class Snapshot:
    t: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if self.t < 0:
            raise DomainError("snapshot time must be nonnegative")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise DomainError("snapshot values must be finite and nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class Extinction:
    T_est: float
    fit_quality: float


@dataclass(frozen=True)
class Trajectory:
    params: FdeParams
    grid: RadialGrid
    snapshots: tuple
    extinction: Optional[Extinction] = None
    boundary_value: float = 0.0

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        times = [s.t for s in snaps]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DomainError("snapshot times must be strictly increasing")
        object.__setattr__(self, "snapshots", snaps)

    @property
    def boundary_kind(self) -> str:
        if self.boundary_value == 0:
            return "zero-dirichlet"
        return f"positive-dirichlet({self.boundary_value:g})"

    @cached_property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @cached_property
    def values(self) -> np.ndarray:
        """Stacked snapshot values, shape (n_snapshots, n_cells)."""
        return np.vstack([s.values for s in self.snapshots])

    def snapshot_at(self, t: float) -> Snapshot:
        """Snapshot at time ``t``, linearly interpolated between stored ones."""
        times = self.times
        if t < times[0] - 1e-14 or t > times[-1] + 1e-14:
            raise DomainError(f"time {t} outside stored range [{times[0]}, {times[-1]}]")
        j = int(np.searchsorted(times, t))
        if j < len(times) and math.isclose(times[j], t, rel_tol=1e-13, abs_tol=1e-300):
            return self.snapshots[j]
        j = min(max(j, 1), len(times) - 1)
        w = (t - times[j - 1]) / (times[j] - times[j - 1])
        vals = (1 - w) * self.snapshots[j - 1].values + w * self.snapshots[j].values
        return Snapshot(float(t), vals)

    def center_value(self, t: float) -> float:
        return float(self.snapshot_at(t).values[0])


@dataclass(frozen=True)
class Cylinder:
    t1: float
    t2: float
    rho: float

    def __post_init__(self):
        if self.t1 > self.t2:
            raise DomainError("cylinder needs t1 <= t2")
        if self.rho <= 0:
            raise DomainError("cylinder radius must be positive")


@dataclass(frozen=True)
class Extremum:
    value: float
    t: float
    r: float


def lp_norm_ball(snap: Snapshot, grid: RadialGrid, p: float, R: float) -> float:
    """Return the integral of u^p over B_R (no p-th root)."""
    if p < 1:
        raise DomainError("p must be >= 1")
    w = grid.ball_weights(R)
    return float(np.dot(w, snap.values**p))


def lp_norm(snap: Snapshot, grid: RadialGrid, p: float, R: float) -> float:
    return lp_norm_ball(snap, grid, p, R) ** (1 / p)


def extremum_on_cylinder(traj: Trajectory, cyl: Cylinder, kind: str) -> Extremum:
    if kind not in ("sup", "inf"):
        raise ValueError(f"kind must be 'sup' or 'inf', got {kind!r}")
    if cyl.rho > traj.grid.R_dom * (1 + 1e-12):
        raise DomainError("cylinder radius exceeds the domain")
    times = traj.times
    tsel = np.nonzero((times >= cyl.t1 - 1e-14) & (times <= cyl.t2 + 1e-14))[0]
    centers = traj.grid.centers
    rsel = np.nonzero(centers <= cyl.rho)[0]
    if tsel.size == 0 or rsel.size == 0:
        raise DomainError("cylinder contains no stored snapshot or node")
    block = traj.values[np.ix_(tsel, rsel)]
    flat = np.argmax(block) if kind == "sup" else np.argmin(block)
    i, j = np.unravel_index(flat, block.shape)
    return Extremum(float(block[i, j]), float(times[tsel[i]]), float(centers[rsel[j]]))


def annulus_average(snap: Snapshot, grid: RadialGrid, R_in: float, R_out: float) -> float:
    if not 0 <= R_in < R_out:
        raise DomainError("annulus needs 0 <= R_in < R_out")
    w = grid.ball_weights(R_out) - grid.ball_weights(R_in)
    return float(np.dot(w, snap.values) / w.sum())

