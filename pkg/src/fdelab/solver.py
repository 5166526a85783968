"""Implicit finite-volume solver for radial fast diffusion with Dirichlet data.

The unknown inside each Newton solve is the potential ``w = phi(u)`` (``u^m/m``,
``u^m`` or ``log u`` depending on the equation form), so the flux between two
cells is a plain difference of potentials and the stiffness matrix is constant.
The nonlinearity sits entirely in the accumulation term ``b(w) = u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import solve_banded

from .core import (
    WITH_INVERSE_M,
    DomainError,
    Extinction,
    FdeParams,
    PreconditionError,
    RadialGrid,
    Snapshot,
    Trajectory,
)


class SolverError(RuntimeError):
    """Newton failed at the smallest allowed step, or the state went bad.

    ``state`` carries the time, step size and last iterate for post-mortems.
    """

    def __init__(self, message: str, state: Optional[dict] = None):
        super().__init__(message)
        self.state = state or {}


@dataclass(frozen=True)
class SolverOptions:
    n_cells: int = 400
    dt_init: float = 1e-6
    dt_min: float = 1e-14
    dt_max: float = math.inf
    newton_tol: float = 1e-10
    newton_max_iters: int = 25
    value_floor: float = 1e-12
    extinction_threshold: float = 1e-4
    snapshot_cadence: Union[int, float] = 1
    boundary: float = 0.0
    horizon: float = math.inf
    # Largest accepted relative change of sup u in one step.
    max_sup_change: float = 0.002

    def __post_init__(self):
        if self.n_cells < 2:
            raise PreconditionError("n_cells must be >= 2")
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise PreconditionError("need 0 < dt_min <= dt_init <= dt_max")
        if self.value_floor <= 0:
            raise PreconditionError("value_floor must be positive")
        if not self.extinction_threshold > self.value_floor:
            raise PreconditionError("extinction_threshold must exceed value_floor")
        if self.boundary < 0:
            raise PreconditionError("boundary value must be nonnegative")
        if self.snapshot_cadence <= 0:
            raise PreconditionError("snapshot_cadence must be positive")
        if not 0 < self.max_sup_change:
            raise PreconditionError("max_sup_change must be positive")

    @property
    def boundary_kind(self) -> str:
        return "zero" if self.boundary == 0 else "positive"


@dataclass(frozen=True)
class ResidualStats:
    max_residual: float
    l2_residual: float
    h: float
    times: tuple = field(default_factory=tuple)


@dataclass(frozen=True)
class MonotonicityMargin:
    """Most negative relative decrease of ``t^{-1/(1-m)} u`` and where it sits."""

    violation: float
    t: float
    r: float


class _Potential:
    """``phi`` and its inverse ``b`` for one equation form."""

    def __init__(self, params: FdeParams, floor: float):
        self.m = params.m
        self.with_form = params.equation_form == WITH_INVERSE_M
        self.floor = floor

    def phi(self, u):
        m = self.m
        if m == 0:
            return np.log(u)
        if self.with_form:
            return u**m / m
        return u**m

    def b(self, w):
        m = self.m
        if m == 0:
            return np.exp(w)
        if m < 0:
            mw = m * w
            with np.errstate(invalid="ignore", divide="ignore"):
                return np.where(mw > 0, np.abs(mw) ** (1 / m), np.nan)
        c = m if self.with_form else 1.0
        # odd extension keeps Newton well defined if an iterate dips below 0
        return np.sign(w) * np.abs(c * w) ** (1 / m)

    def db(self, u):
        slope = np.maximum(np.abs(u), self.floor) ** (1 - self.m)
        return slope if self.with_form else slope / self.m


def _face_coefficients(grid: RadialGrid) -> np.ndarray:
    """``A/dr`` at each face; the outer face sees the boundary half a cell away."""
    centers = grid.centers
    areas = grid.face_areas
    coef = np.zeros(grid.n_cells + 1)
    coef[1:-1] = areas[1:-1] / np.diff(centers)
    coef[-1] = areas[-1] / (grid.R_dom - centers[-1])
    return coef


def _net_inflow(w: np.ndarray, w_bdry: float, coef: np.ndarray) -> np.ndarray:
    flux = np.empty_like(coef)
    flux[0] = 0.0
    flux[1:-1] = coef[1:-1] * (w[1:] - w[:-1])
    flux[-1] = coef[-1] * (w_bdry - w[-1])
    return flux[1:] - flux[:-1]


def _sample(u0, grid: RadialGrid) -> np.ndarray:
    if callable(u0):
        vals = np.asarray(u0(grid.centers), dtype=float)
        if vals.shape == ():
            vals = np.full(grid.n_cells, float(vals))
    else:
        vals = np.asarray(u0, dtype=float)
    if vals.shape != (grid.n_cells,):
        raise DomainError(f"initial data has shape {vals.shape}, expected ({grid.n_cells},)")
    if not np.all(np.isfinite(vals)) or np.any(vals < 0):
        raise DomainError("initial data must be finite and nonnegative")
    return vals


class _Stepper:
    def __init__(self, params: FdeParams, grid: RadialGrid, opts: SolverOptions, scale: float):
        self.pot = _Potential(params, opts.value_floor * scale)
        self.vol = grid.shell_volumes
        self.coef = _face_coefficients(grid)
        self.opts = opts
        self.w_bdry = float(self.pot.phi(opts.boundary)) if opts.boundary > 0 else 0.0
        n = grid.n_cells
        self.ab = np.zeros((3, n))
        self.ab[0, 1:] = -self.coef[1:-1]
        self.ab[2, :-1] = -self.coef[1:-1]
        self.stiff_diag = self.coef[:-1] + self.coef[1:]

    def residual(self, w, u, u_old, dt):
        return self.vol * (u - u_old) / dt - _net_inflow(w, self.w_bdry, self.coef)

    def step(self, w0: np.ndarray, u_old: np.ndarray, dt: float):
        """One implicit Euler step; returns (w, u, iterations) or None on failure."""
        opts, pot = self.opts, self.pot
        w = w0.copy()
        u = pot.b(w)
        if not np.all(np.isfinite(u)):
            return None
        F = self.residual(w, u, u_old, dt)
        weight = dt / self.vol
        merit = np.linalg.norm(F * weight)
        for it in range(1, opts.newton_max_iters + 1):
            ab = self.ab.copy()
            ab[1] = self.vol * pot.db(u) / dt + self.stiff_diag
            try:
                dw = solve_banded((1, 1), ab, -F, check_finite=False)
            except (np.linalg.LinAlgError, ValueError):
                return None
            lam = 1.0
            for _ in range(12):
                w_try = w + lam * dw
                u_try = pot.b(w_try)
                if np.all(np.isfinite(u_try)):
                    F_try = self.residual(w_try, u_try, u_old, dt)
                    merit_try = np.linalg.norm(F_try * weight)
                    if merit_try < merit or merit_try == 0 or lam == 1.0 and merit_try <= merit * (1 + 1e-12):
                        break
                lam *= 0.5
            else:
                return None
            change = np.max(np.abs(u_try - u))
            w, u, F, merit = w_try, u_try, F_try, merit_try
            size = max(np.max(np.abs(u)), pot.floor)
            if change <= opts.newton_tol * size:
                return w, u, it
        return None


def solve_radial_dirichlet(
    params: FdeParams,
    u0: Union[Callable[[np.ndarray], np.ndarray], np.ndarray],
    R_dom: float,
    opts: SolverOptions = SolverOptions(),
) -> Trajectory:
    """Integrate the radial Dirichlet problem on ``B_{R_dom}`` from ``u0``.

    ``u0`` is either a function of radius (sampled at cell centers) or an array
    of cell values. The run stops at ``opts.horizon`` or once sup u falls below
    ``opts.extinction_threshold`` times its initial value; in the latter case
    the trajectory carries an extinction-time fit.
    """
    grid = RadialGrid.uniform(R_dom, opts.n_cells, params.d)
    u = _sample(u0, grid)
    if params.m <= 0:
        if opts.boundary <= 0:
            raise PreconditionError("m <= 0 needs a positive Dirichlet boundary value")
        if np.any(u <= 0):
            raise PreconditionError("m <= 0 needs strictly positive initial data")

    sup0 = float(u.max())
    snapshots = [Snapshot(0.0, u)]
    if sup0 == 0 and opts.boundary == 0:
        # zero stays zero
        if math.isfinite(opts.horizon) and opts.horizon > 0:
            snapshots.append(Snapshot(float(opts.horizon), u))
        return Trajectory(params, grid, tuple(snapshots), None, 0.0)

    scale = max(sup0, opts.boundary)
    stepper = _Stepper(params, grid, opts, scale)
    pot = stepper.pot
    with np.errstate(divide="ignore"):
        w = np.where(u > 0, pot.phi(np.maximum(u, 1e-300)), 0.0) if params.m > 0 else pot.phi(u)

    can_extinguish = opts.boundary == 0 and params.m > 0
    cadence = opts.snapshot_cadence
    by_steps = isinstance(cadence, (int, np.integer)) and not isinstance(cadence, bool)
    next_snap = float(cadence)

    t, dt = 0.0, opts.dt_init
    n_steps = 0
    hist_t, hist_sup = [0.0], [sup0]
    sup_old = sup0
    mass_old = float(np.dot(grid.shell_volumes, u))
    while t < opts.horizon:
        dt_try = min(dt, opts.horizon - t)
        result = stepper.step(w, u, dt_try)
        if result is not None:
            w_new, u_new, iters = result
            if u_new.min() < -opts.newton_tol * scale:
                raise SolverError(
                    "solution went negative beyond tolerance",
                    {"t": t, "dt": dt_try, "u": u_new.copy()},
                )
            sup_new = float(u_new.max())
            mass_new = float(np.dot(grid.shell_volumes, u_new))
            rel = abs(sup_new - sup_old) / max(sup_old, pot.floor)
            rel_mass = abs(mass_new - mass_old) / max(abs(mass_old), pot.floor)
            too_big = max(rel, rel_mass) > opts.max_sup_change and dt_try > opts.dt_min
        if result is None or too_big:
            dt = dt_try / 2
            if dt < opts.dt_min:
                raise SolverError(
                    f"Newton failed at dt_min (t={t:.6g})",
                    {"t": t, "dt": dt_try, "u": u.copy(), "w": w.copy()},
                )
            continue

        t += dt_try
        n_steps += 1
        w, u = w_new, u_new
        sup_old, mass_old = sup_new, mass_new
        hist_t.append(t)
        hist_sup.append(sup_new)
        if iters <= 3 and max(rel, rel_mass) < opts.max_sup_change / 2:
            dt = min(2 * dt_try, opts.dt_max)
        elif iters > 8:
            dt = max(dt_try / 2, opts.dt_min)

        extinct = can_extinguish and sup_new < opts.extinction_threshold * sup0
        finished = extinct or t >= opts.horizon
        if by_steps:
            take = n_steps % int(cadence) == 0
        else:
            take = t >= next_snap * (1 - 1e-12)
            if take:
                next_snap = (math.floor(t / cadence + 1e-9) + 1) * cadence
        if take or finished:
            snapshots.append(Snapshot(t, np.maximum(u, 0.0)))
        if extinct:
            break

    extinction = None
    if can_extinguish:
        extinction = _fit_extinction(
            np.array(hist_t), np.array(hist_sup), params.m, opts.extinction_threshold
        )
    return Trajectory(params, grid, tuple(snapshots), extinction, float(opts.boundary))


def _fit_extinction(times, sups, m: float, threshold: float) -> Optional[Extinction]:
    if sups[0] <= 0 or sups[-1] > threshold * sups[0] * (1 + 1e-9):
        return None
    sel = sups <= 10 * sups[-1]
    if sel.sum() < 4:
        sel = np.zeros_like(sel)
        sel[-4:] = True
    t, y = times[sel], sups[sel] ** (1 - m)
    slope, intercept = np.polyfit(t, y, 1)
    if slope >= 0:
        return None
    span = y.max() - y.min()
    quality = float(np.max(np.abs(y - (slope * t + intercept))) / span) if span > 0 else math.inf
    return Extinction(T_est=float(-intercept / slope), fit_quality=quality)


def extinction_estimate(traj: Trajectory, threshold: float = 1e-3) -> Optional[Extinction]:
    """Extrapolate the extinction time from the stored snapshots.

    Returns None unless the run has zero boundary data, ``0 < m < 1`` and sup u
    decayed below ``threshold`` times its initial value.
    """
    if traj.boundary_value != 0 or not 0 < traj.params.m < 1:
        return None
    sups = traj.values.max(axis=1)
    return _fit_extinction(traj.times, sups, traj.params.m, threshold)


def pde_residual(
    evaluator: Callable[[float, np.ndarray], np.ndarray],
    params: FdeParams,
    grid: RadialGrid,
    times: Sequence[float],
    r_range: Optional[tuple] = None,
    dt_fd: Optional[float] = None,
) -> ResidualStats:
    """Residual of ``u_t - L_h(u)`` for a candidate solution given pointwise.

    ``L_h`` is the solver's finite-volume operator applied to point values at
    cell centers; ``u_t`` is a centered difference with step ``dt_fd`` (the
    grid spacing by default, so both error terms are second order). The last
    cell is skipped since its boundary face is only first-order accurate.
    """
    pot = _Potential(params, 1e-300)
    centers = grid.centers
    h = float(np.max(np.diff(grid.radii)))
    dt_fd = h if dt_fd is None else dt_fd
    coef = _face_coefficients(grid)
    vol = grid.shell_volumes
    keep = np.zeros(grid.n_cells, dtype=bool)
    keep[:-1] = True
    if r_range is not None:
        keep &= (centers >= r_range[0]) & (centers <= r_range[1])
    if not keep.any():
        raise DomainError("no nodes in the requested radius range")
    # Only the nodes and their immediate neighbors need evaluating.
    need = keep.copy()
    need[1:] |= keep[:-1]
    need[:-1] |= keep[1:]
    idx = np.nonzero(need)[0]

    def values(t):
        u = np.full(grid.n_cells, np.nan)
        u[idx] = np.asarray(evaluator(t, centers[idx]), dtype=float)
        if np.any(u[idx] < 0):
            raise DomainError(f"evaluator returned negative values at t={t}")
        return u

    worst, sq, weight = 0.0, 0.0, 0.0
    for t in times:
        dt = min(dt_fd, t) if t > 0 else 0.0
        if dt > 0:
            u_t = (values(t + dt) - values(t - dt)) / (2 * dt)
        else:
            u_t = (values(t + dt_fd) - values(t)) / dt_fd
        with np.errstate(divide="ignore", invalid="ignore"):
            w = pot.phi(values(t))
        w = np.where(need, w, 0.0)
        lap = _net_inflow(w, 0.0, coef) / vol
        res = np.abs(u_t - lap)[keep]
        worst = max(worst, float(res.max()))
        sq += float(np.dot(vol[keep], res**2))
        weight += float(vol[keep].sum())
    return ResidualStats(worst, math.sqrt(sq / weight), h, tuple(float(t) for t in times))


def benilan_crandall_margin(traj: Trajectory) -> MonotonicityMargin:
    """Check that ``t^{-1/(1-m)} u(t, r)`` does not increase between snapshots.

    Each decrease is measured relative to the sup of the earlier scaled
    snapshot. A nonnegative violation means the monotonicity holds.
    """
    m = traj.params.m
    if not 0 < m < 1:
        raise PreconditionError("the time-monotonicity check needs 0 < m < 1")
    times, vals = traj.times, traj.values
    keep = times > 0
    times, vals = times[keep], vals[keep]
    if times.size < 2:
        return MonotonicityMargin(0.0, float("nan"), float("nan"))
    scaled = vals * times[:, None] ** (-1 / (1 - m))
    scale = scaled[:-1].max(axis=1, keepdims=True)
    scale = np.where(scale > 0, scale, 1.0)
    drop = (scaled[:-1] - scaled[1:]) / scale
    i, j = np.unravel_index(np.argmin(drop), drop.shape)
    return MonotonicityMargin(float(drop[i, j]), float(times[i + 1]), float(traj.grid.centers[j]))


def write_trajectory_csv(traj: Trajectory, path: Union[str, Path]) -> Path:
    """Write ``t,r,u`` rows plus a ``key=value`` sidecar next to ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    centers = traj.grid.centers
    n_t, n_r = traj.values.shape
    rows = np.column_stack(
        [np.repeat(traj.times, n_r), np.tile(centers, n_t), traj.values.ravel()]
    )
    np.savetxt(path, rows, delimiter=",", header="t,r,u", comments="", fmt="%.17g")
    ext = traj.extinction
    meta = {
        "m": repr(traj.params.m),
        "d": str(traj.params.d),
        "equation_form": traj.params.equation_form,
        "R_dom": repr(traj.grid.R_dom),
        "n_cells": str(traj.grid.n_cells),
        "boundary": "zero" if traj.boundary_value == 0 else f"positive({traj.boundary_value!r})",
        "T_est": repr(ext.T_est) if ext else "absent",
    }
    sidecar = sidecar_path(path)
    sidecar.write_text("".join(f"{k}={v}\n" for k, v in meta.items()))
    return sidecar


def sidecar_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def read_trajectory_csv(path: Union[str, Path]) -> Trajectory:
    path = Path(path)
    meta = dict(
        line.split("=", 1) for line in sidecar_path(path).read_text().splitlines() if "=" in line
    )
    params = FdeParams(float(meta["m"]), int(meta["d"]), meta["equation_form"])
    grid = RadialGrid.uniform(float(meta["R_dom"]), int(meta["n_cells"]), params.d)
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n_r = grid.n_cells
    times = rows[::n_r, 0]
    vals = rows[:, 2].reshape(len(times), n_r)
    boundary = meta["boundary"]
    bval = 0.0 if boundary == "zero" else float(boundary[len("positive("):-1])
    ext = None
    if meta.get("T_est", "absent") != "absent":
        ext = Extinction(float(meta["T_est"]), math.nan)
    snaps = tuple(Snapshot(float(t), v) for t, v in zip(times, vals))
    return Trajectory(params, grid, snaps, ext, bval)
