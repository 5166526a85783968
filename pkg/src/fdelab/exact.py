"""Reference solutions and the scalings that relate solutions to one another."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import brentq

from .core import (
    WITH_INVERSE_M,
    WITHOUT_INVERSE_M,
    Extinction,
    FdeParams,
    PreconditionError,
    RadialGrid,
    Snapshot,
    Trajectory,
)


class ShootingError(RuntimeError):
    """The profile shooting could not bracket the requested radius."""


@dataclass(frozen=True)
class ExactSolution:
    kind: str
    params: FdeParams
    T: Optional[float]
    constants: dict
    evaluator: Callable[[float, np.ndarray], np.ndarray] = field(repr=False)

    def __call__(self, t: float, r) -> np.ndarray:
        return self.evaluator(t, np.asarray(r, dtype=float))


def vss_constant(params: FdeParams) -> float:
    """Amplitude that makes ``c (T-t)^{1/(1-m)} r^{-2/(1-m)}`` an exact solution."""
    m, d = params.m, params.d
    sigma = d * (1 - m) - 2
    if sigma <= 0:
        raise PreconditionError("subcritical range required (m < (d-2)/d)")
    power = 2 * sigma / (1 - m)
    if params.equation_form == WITHOUT_INVERSE_M:
        power *= m
    return power ** (1 / (1 - m))


def vss(params: FdeParams, T: float) -> ExactSolution:
    """Singular separate-variables solution blowing up at the origin."""
    c = vss_constant(params)
    a = 1 / (1 - params.m)

    def evaluate(t, r):
        with np.errstate(divide="ignore"):  # r = 0 is the singular point
            return c * max(T - t, 0.0) ** a * np.asarray(r, dtype=float) ** (-2 * a)

    return ExactSolution("vss", params, T, {"c": c}, evaluate)


@dataclass(frozen=True)
class SeparableProfile:
    """Positive solution of ``Δ(S^m) + S/(1-m) = 0`` on ``B_{R0}`` vanishing at ``R0``.

    ``radii``/``values`` sample the profile; ``shooting_residual`` is the gap
    between the zero of the shot profile and ``R0``.
    """

    params: FdeParams
    R0: float
    radii: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    shooting_residual: float
    center_potential: float
    _ode: Callable = field(repr=False, compare=False)
    _r_start: float = field(repr=False, compare=False)

    def potential(self, r) -> np.ndarray:
        """``G = S^m`` at radius ``r`` (zero outside the ball)."""
        r = np.abs(np.asarray(r, dtype=float))
        out = np.zeros_like(r)
        G0, m, d = self.center_potential, self.params.m, self.params.d
        near = r < self._r_start
        out[near] = G0 - G0 ** (1 / m) * r[near] ** 2 / (2 * d * (1 - m))
        mid = ~near & (r < self.R0)
        if mid.any():
            out[mid] = self._ode(np.minimum(r[mid], self._r_end))[0]
        return np.maximum(out, 0.0)

    @property
    def _r_end(self) -> float:
        return self.R0 + self.shooting_residual if self.shooting_residual < 0 else self.R0

    def __call__(self, r) -> np.ndarray:
        return self.potential(r) ** (1 / self.params.m)

    def solution(self, T1: float, equation_form: str = WITHOUT_INVERSE_M) -> ExactSolution:
        """``S(r) (T1 - t)^{1/(1-m)}`` with ``T1`` measured in the clock of ``equation_form``."""
        m = self.params.m
        a = 1 / (1 - m)
        amp = 1.0 if equation_form == WITHOUT_INVERSE_M else m ** (-a)
        params = self.params.with_form(equation_form)

        def evaluate(t, r):
            return amp * self(r) * max(T1 - t, 0.0) ** a

        consts = {"T1": T1, "S0": float(self(0.0)), "R0": self.R0}
        return ExactSolution("separable", params, T1, consts, evaluate)


def _shoot(G0: float, m: float, d: int, r_start: float, r_max: float):
    def rhs(r, y):
        g, dg = y
        return [dg, -(d - 1) / r * dg - np.sign(g) * abs(g) ** (1 / m) / (1 - m)]

    def hit_zero(r, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1
    g = G0 - G0 ** (1 / m) * r_start**2 / (2 * d * (1 - m))
    dg = -(G0 ** (1 / m)) * r_start / (d * (1 - m))
    return solve_ivp(
        rhs, (r_start, r_max), [g, dg], method="DOP853", rtol=1e-12, atol=1e-14 * G0,
        events=hit_zero, dense_output=True,
    )


def _zero_radius(G0, m, d, r_start, r_max) -> float:
    sol = _shoot(G0, m, d, r_start, r_max)
    return float(sol.t_events[0][0]) if sol.t_events[0].size else math.inf


@lru_cache(maxsize=64)
def _separable_cached(m: float, d: int, R0: float, mesh: int) -> SeparableProfile:
    if not 0 < m < 1:
        raise PreconditionError("separable profile needs 0 < m < 1")
    r_start = 1e-6 * R0
    r_max = 4 * R0

    def gap(G0):
        return min(_zero_radius(G0, m, d, r_start, r_max), r_max) - R0

    # The zero radius decreases with G0; expand until the root is bracketed.
    lo, hi = 1.0, 1.0
    for _ in range(200):
        if gap(lo) > 0:
            break
        lo /= 4
    for _ in range(200):
        if gap(hi) < 0:
            break
        hi *= 4
    if not (gap(lo) > 0 > gap(hi)):
        raise ShootingError(
            f"could not bracket R0={R0} for m={m}, d={d}: "
            f"gap({lo:.3g})={gap(lo):.3g}, gap({hi:.3g})={gap(hi):.3g}; "
            "a vanishing profile needs m > (d-2)/(d+2)"
        )
    G0 = brentq(gap, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    sol = _shoot(G0, m, d, r_start, r_max)
    r_zero = float(sol.t_events[0][0])
    radii = np.linspace(0.0, R0, mesh)
    prof = SeparableProfile(
        FdeParams(m, d, WITHOUT_INVERSE_M), R0, radii, np.empty(0), r_zero - R0, G0,
        sol.sol, r_start,
    )
    values = prof(radii)
    values.setflags(write=False)
    object.__setattr__(prof, "values", values)
    return prof


def separable_profile(params: FdeParams, R0: float = 1.0, mesh: int = 2001) -> SeparableProfile:
    """Shoot on the central value of ``S^m`` until the profile vanishes at ``R0``."""
    if params.equation_form != WITHOUT_INVERSE_M:
        raise PreconditionError("the separable profile is defined for the without-inverse-m form")
    if R0 <= 0:
        raise PreconditionError("R0 must be positive")
    return _separable_cached(float(params.m), int(params.d), float(R0), int(mesh))


@dataclass(frozen=True)
class Rescaling:
    """``u(t, x) = amplitude * û(t / tau, x / length)`` for mass ``M`` on ``B_R``."""

    tau: float
    amplitude: float
    length: float

    def to_unit(self, t, r, u):
        return np.asarray(t) / self.tau, np.asarray(r) / self.length, np.asarray(u) / self.amplitude

    def from_unit(self, t, r, u):
        return np.asarray(t) * self.tau, np.asarray(r) * self.length, np.asarray(u) * self.amplitude

    def trajectory_to_unit(self, traj: Trajectory) -> Trajectory:
        return self._map(traj, 1 / self.tau, 1 / self.length, 1 / self.amplitude)

    def trajectory_from_unit(self, traj: Trajectory) -> Trajectory:
        return self._map(traj, self.tau, self.length, self.amplitude)

    @staticmethod
    def _map(traj: Trajectory, ft: float, fr: float, fu: float) -> Trajectory:
        grid = RadialGrid(traj.grid.radii * fr, traj.grid.d)
        snaps = tuple(Snapshot(s.t * ft, s.values * fu) for s in traj.snapshots)
        ext = traj.extinction
        if ext is not None:
            ext = Extinction(ext.T_est * ft, ext.fit_quality)
        return Trajectory(traj.params, grid, snaps, ext, traj.boundary_value * fu)


def rescale_to_unit(M: float, R: float, params: FdeParams) -> Rescaling:
    if M <= 0 or R <= 0:
        raise PreconditionError("mass and radius must be positive")
    m, d = params.m, params.d
    tau = R ** (2 - d * (1 - m)) * M ** (1 - m)
    return Rescaling(tau=tau, amplitude=M / R**d, length=R)


def trajectory_interpolator(traj: Trajectory) -> Callable[[float, np.ndarray], np.ndarray]:
    """Bilinear (t, r) interpolant of a stored trajectory.

    The radial axis is padded with ``r = 0`` (symmetry) and ``r = R_dom``
    (boundary value); past the last snapshot an extinct run is zero.
    """
    grid = traj.grid
    vals = traj.values
    radii = np.concatenate([[0.0], grid.centers, [grid.R_dom]])
    table = np.column_stack([vals[:, 0], vals, np.full(len(vals), traj.boundary_value)])
    times = traj.times
    if len(times) == 1:
        times = np.array([times[0], times[0] + 1.0])
        table = np.vstack([table, table])
    interp = RegularGridInterpolator((times, radii), table, bounds_error=False, fill_value=None)
    t_last = traj.times[-1]
    extinct = traj.extinction is not None

    def evaluate(t, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        outside = r > grid.R_dom
        if extinct and t > t_last:
            out = np.zeros_like(r)
        else:
            tc = min(max(t, times[0]), times[-1])
            pts = np.column_stack([np.full(r.size, tc), np.clip(r, 0.0, grid.R_dom)])
            out = np.maximum(interp(pts), 0.0)
        out[outside] = traj.boundary_value
        return out

    return evaluate


def dirac_family(base: Trajectory, k: float) -> ExactSolution:
    """Concentrating rescalings ``k^d u(k^{-σ} t, k r)`` of a base run."""
    m, d = base.params.m, base.params.d
    sigma = d * (1 - m) - 2
    if not (0 < m and sigma > 0):
        raise PreconditionError("dirac_family needs 0 < m < (d-2)/d")
    if k < 1:
        raise PreconditionError("k must be >= 1")
    base_eval = trajectory_interpolator(base)

    def evaluate(t, r):
        return k**d * base_eval(t * k ** (-sigma), k * np.asarray(r, dtype=float))

    T1 = base.extinction.T_est if base.extinction else None
    Tk = T1 * k**sigma if T1 is not None else None
    dt = np.diff(base.times)
    consts = {
        "k": k,
        "sigma": sigma,
        "T1": T1,
        "Tk": Tk,
        "interp_h": float(np.max(np.diff(base.grid.radii))) / k,
        "interp_dt": float(dt.max() * k**sigma) if dt.size else 0.0,
    }
    return ExactSolution("dirac-family", base.params, Tk, consts, evaluate)
