"""Evaluate the positivity, smoothing and Harnack inequalities on trajectories.

Each check computes both sides of one inequality from a stored trajectory and
the constants of :mod:`fdelab.constants` (taken in the trajectory's clock) and
returns an :class:`EstimateReport`.  The margin is signed so that positive
means the inequality holds with room; ``holds`` allows ``tolerance`` of slack.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import betainc

from .constants import (
    critical_time,
    cutoff_k0,
    extinction_constants,
    good_range_constants,
    harnack_constants,
    lp_evolution_constant,
    moser_constants,
    positivity_constants,
)
from .core import (
    WITHOUT_INVERSE_M,
    Cylinder,
    DomainError,
    FdeParams,
    PreconditionError,
    Snapshot,
    Trajectory,
    annulus_average,
    extremum_on_cylinder,
    lp_norm_ball,
    time_factor,
    unit_ball_volume,
)
from .exact import ExactSolution, dirac_family
from .solver import SolverOptions, benilan_crandall_margin, solve_radial_dirichlet

LE = "lhs<=rhs"
GE = "lhs>=rhs"
DEFAULT_TOLERANCE = 1e-8
HARNACK_VARIANTS = ("initial", "intrinsic", "alternative", "good-range")
SHIFTS = ("forward", "backward", "elliptic")


@dataclass(frozen=True)
class EstimateReport:
    name: str
    variant: str
    inputs: dict
    lhs: float
    rhs: float
    direction: str
    margin: float
    holds: bool
    tolerance: float = DEFAULT_TOLERANCE
    notes: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.lhs) and math.isfinite(self.rhs)):
            raise ValueError(f"{self.name}: non-finite sides lhs={self.lhs}, rhs={self.rhs}")
        if self.holds != (self.margin >= -self.tolerance):
            raise ValueError("holds must equal margin >= -tolerance")

    @property
    def raw_holds(self) -> bool:
        return self.margin >= 0

    @property
    def relative_margin(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs))
        return self.margin / scale if scale > 0 else 0.0

    def with_tolerance(self, tolerance: float) -> "EstimateReport":
        return dataclasses.replace(self, tolerance=tolerance, holds=self.margin >= -tolerance)


def make_report(
    name: str,
    lhs: float,
    rhs: float,
    direction: str,
    inputs: Optional[dict] = None,
    variant: str = "",
    tolerance: float = DEFAULT_TOLERANCE,
    notes: str = "",
) -> EstimateReport:
    lhs, rhs = float(lhs), float(rhs)
    margin = rhs - lhs if direction == LE else lhs - rhs
    return EstimateReport(
        name, variant, dict(inputs or {}), lhs, rhs, direction, margin,
        margin >= -tolerance, tolerance, notes,
    )


def pair_tolerance(fine: EstimateReport, coarse: EstimateReport, factor: float = 3.0) -> float:
    """Tolerance from the margin change between a fine and a coarse run."""
    return max(DEFAULT_TOLERANCE, factor * abs(fine.margin - coarse.margin))


# ---------------------------------------------------------------- helpers


def _require_fast(traj: Trajectory, what: str) -> None:
    if not 0 < traj.params.m < 1:
        raise PreconditionError(f"{what} needs 0 < m < 1, got m={traj.params.m}")


def _extinction_time(traj: Trajectory, T: Optional[float] = None) -> float:
    if T is not None:
        return float(T)
    if traj.extinction is None:
        raise PreconditionError("trajectory was not run to extinction")
    return traj.extinction.T_est


def _is_zero(traj: Trajectory) -> bool:
    return not np.any(traj.snapshots[0].values > 0) and traj.boundary_value == 0


def _require_support(traj: Trajectory, R: float) -> None:
    """Initial data must vanish on every cell lying outside ``B_R``."""
    inner = traj.grid.radii[:-1]
    outside = inner >= R * (1 - 1e-12)
    if np.any(traj.snapshots[0].values[outside] > 0):
        raise PreconditionError(f"initial data is not supported in B_{R:g}")


def _require_radius(traj: Trajectory, R: float, what: str = "radius") -> None:
    if R > traj.grid.R_dom * (1 + 1e-12):
        raise PreconditionError(f"{what} {R:g} exceeds the domain radius {traj.grid.R_dom:g}")


def _require_time(traj: Trajectory, t: float) -> None:
    if not traj.times[0] <= t <= traj.times[-1] * (1 + 1e-12):
        raise PreconditionError(f"time {t:g} is outside the stored range")


def _mass(snap: Snapshot, traj: Trajectory, R: float) -> float:
    return lp_norm_ball(snap, traj.grid, 1, R)


def _profile_at(traj: Trajectory, t: float) -> np.ndarray:
    return traj.snapshot_at(t).values


def _inf_ball(traj: Trajectory, t: float, R: float) -> float:
    """Infimum over ``B_R``: cell values inside plus the interpolated value at ``R``."""
    vals = _profile_at(traj, t)
    c = traj.grid.centers
    inside = vals[c <= R]
    edge = float(np.interp(R, c, vals))
    return float(min(inside.min(), edge)) if inside.size else edge


def _sup_ball(traj: Trajectory, t: float, R: float) -> float:
    vals = _profile_at(traj, t)
    c = traj.grid.centers
    inside = vals[c <= R]
    return float(inside.max()) if inside.size else float(np.interp(R, c, vals))


def _center(traj: Trajectory, t: float) -> float:
    return traj.center_value(t)


def _annulus_weights(traj: Trajectory, R_in: float, R_out: float) -> np.ndarray:
    return traj.grid.ball_weights(R_out) - traj.grid.ball_weights(R_in)


def _time_integral(
    traj: Trajectory, s: float, integrand: Callable[[np.ndarray], float], T: float, m: float
) -> tuple[float, float]:
    """``∫_s^T integrand(u(t)) dt`` by the trapezoid rule plus a separable tail.

    After the last snapshot ``u`` decays like ``(T - t)^{1/(1-m)}``; for an
    integrand homogeneous of degree ``m`` the tail is ``(1-m) (T - t_last)``
    times the integrand at ``t_last``.  Returns ``(total, tail)``.
    """
    times = traj.times
    t_last = float(times[-1])
    if s >= t_last:
        base = integrand(_profile_at(traj, t_last))
        span = max(T - s, 0.0)
        tail = base * (1 - m) * span * (span / max(T - t_last, 1e-300)) ** (m / (1 - m))
        return tail, tail
    keep = times > s
    ts = np.concatenate([[s], times[keep]])
    vals = [integrand(_profile_at(traj, s))] + [integrand(v) for v in traj.values[keep]]
    body = float(trapezoid(vals, ts))
    tail = vals[-1] * (1 - m) * max(T - t_last, 0.0)
    return body + tail, tail


# ---------------------------------------------------- flux and positivity


def check_flux_lemma(traj: Trajectory, R: float, R0: float, s: float) -> EstimateReport:
    """``k0 (R0-2R)^2 ∫_{B_R0} u(s) <= ∫_s^T ∫_{R0 > |x| > 2R} u^m`` (time in the ``Δ(u^m)`` clock)."""
    _require_fast(traj, "the flux lemma")
    inputs = {"s": s, "R": R, "R0": R0}
    if _is_zero(traj):
        return make_report("flux_lemma", 0.0, 0.0, LE, inputs, notes="zero solution")
    T = _extinction_time(traj)
    if not 0 < 2 * R < R0:
        raise PreconditionError("need R0 > 2R > 0")
    _require_radius(traj, R0, "R0")
    _require_support(traj, R)
    if not 0 <= s <= T:
        raise PreconditionError(f"need 0 <= s <= T = {T:g}")
    m = traj.params.m
    k0 = cutoff_k0(traj.params.d, R, R0).k0
    w_ann = _annulus_weights(traj, 2 * R, R0)
    clock = time_factor(traj.params, WITHOUT_INVERSE_M)
    total, tail = _time_integral(traj, s, lambda v: float(np.dot(w_ann, v**m)), T, m)
    t_last = float(traj.times[-1])
    if s <= t_last:
        mass = _mass(traj.snapshot_at(s), traj, R0)
    else:
        decay = ((T - s) / (T - t_last)) ** (1 / (1 - m)) if T > t_last else 0.0
        mass = _mass(traj.snapshots[-1], traj, R0) * decay
    lhs = k0 * (R0 - 2 * R) ** 2 * mass
    rhs = clock * total
    return make_report("flux_lemma", lhs, rhs, LE, inputs,
                       notes=f"tail={clock * tail:.6g} T={T:.6g} k0={k0:.6g}")


def check_critical_time(traj: Trajectory, R: float, R0: Optional[float] = None) -> EstimateReport:
    """Extinction lower bound ``2 t_* <= T`` for the minimal problem on ``B_R0`` (default ``3R``)."""
    _require_fast(traj, "the critical-time bound")
    R0 = 3 * R if R0 is None else R0
    _require_support(traj, R)
    _require_radius(traj, R0, "R0")
    T = _extinction_time(traj)
    M = _mass(traj.snapshots[0], traj, R)
    t_star = critical_time(traj.params, R, R0 / (2 * R), M)
    return make_report("critical_time", 2 * t_star, T, LE, {"R": R, "R0": R0},
                       notes=f"t_star={t_star:.6g}")


def check_positivity_lower(
    traj: Trajectory, t: float, R: float, R0: Optional[float] = None, variant: str = "T-form"
) -> EstimateReport:
    """Center lower bound for the minimal problem on ``B_R0`` (default ``3R``).

    ``T-form``: ``u^m(t,0) >= c1' R^{2-d} M T^{-1/(1-m)} t^{m/(1-m)}`` for ``t <= t_*``.
    ``good-range``: ``u(t,0) >= c_md (t/R^2)^{1/(1-m)}`` for ``m_c < m < 1``.
    """
    _require_fast(traj, "the positivity bound")
    R0 = 3 * R if R0 is None else R0
    lam = R0 / (2 * R)
    inputs = {"t": t, "R": R, "R0": R0}
    _require_support(traj, R)
    _require_radius(traj, R0, "R0")
    m, d = traj.params.m, traj.params.d
    M = _mass(traj.snapshots[0], traj, R)
    if M == 0:
        return make_report("positivity_lower", 0.0, 0.0, GE, inputs, variant, notes="zero data")
    t_star = critical_time(traj.params, R, lam, M)
    if not 0 < t <= t_star * (1 + 1e-12):
        raise PreconditionError(f"need 0 < t <= t_* = {t_star:g}")
    _require_time(traj, t)
    u_c = _center(traj, t)
    if variant == "T-form":
        T = _extinction_time(traj)
        c1p = positivity_constants(traj.params, lam).value("c1_prime")
        rhs = c1p * R ** (2 - d) * M * T ** (-1 / (1 - m)) * t ** (m / (1 - m))
        return make_report("positivity_lower", u_c**m, rhs, GE, inputs, variant,
                           notes=f"t_star={t_star:.6g} T={T:.6g}")
    if variant == "good-range":
        if not math.isclose(lam, 1.5):
            raise PreconditionError("the good-range bound uses the geometry R0 = 3R")
        c_md = good_range_constants(traj.params).value("c_md")
        rhs = c_md * (t / R**2) ** (1 / (1 - m))
        return make_report("positivity_lower", u_c, rhs, GE, inputs, variant,
                           notes=f"t_star={t_star:.6g}")
    raise ValueError(f"unknown variant {variant!r}")


def check_ac_lower(
    traj: Trajectory,
    t: float,
    R: float,
    variant: str = "T-form",
    R0: Optional[float] = None,
    C1: Optional[float] = None,
) -> EstimateReport:
    """Two-term bound on the data mass by a data-free term and the later center value.

    ``R^{-d} M <= C1 R^{-2/(1-m)} t^{1/(1-m)} + C2 T^{1/(1-m)} R^{-2} t^{-m/(1-m)} u^m(t,0)``;
    the ``pc-form`` replaces ``C2 T^{1/(1-m)}`` by ``C3 ||u0||_{L^{p_c}(B_R)}``.
    """
    _require_fast(traj, "the two-term mass bound")
    R0 = 3 * R if R0 is None else R0
    _require_support(traj, R)
    _require_radius(traj, R0, "R0")
    T = _extinction_time(traj)
    if not 0 < t < T:
        raise PreconditionError(f"need 0 < t < T = {T:g}")
    _require_time(traj, t)
    m, d = traj.params.m, traj.params.d
    consts = positivity_constants(traj.params, R0 / (2 * R))
    C1 = consts.value("C1") if C1 is None else C1
    M = _mass(traj.snapshots[0], traj, R)
    u_c = _center(traj, t)
    first = C1 * R ** (-2 / (1 - m)) * t ** (1 / (1 - m))
    later = R**-2 * t ** (-m / (1 - m)) * u_c**m
    if variant == "T-form":
        second = consts.value("C2") * T ** (1 / (1 - m)) * later
    elif variant == "pc-form":
        if "C3" not in consts:
            raise PreconditionError("the pc-form needs d >= 3 and m < m_c")
        p_c = d * (1 - m) / 2
        norm = lp_norm_ball(traj.snapshots[0], traj.grid, p_c, R) ** (1 / p_c)
        second = consts.value("C3") * norm * later
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return make_report(
        "ac_lower", R**-d * M, first + second, LE, {"t": t, "R": R, "R0": R0}, variant,
        notes=f"data_free_term={first:.6g} solution_term={second:.6g}",
    )


# ----------------------------------------------------------- extinction


def check_extinction_bounds(
    traj: Trajectory, p: float, R: Optional[float] = None, T: Optional[float] = None
) -> list[EstimateReport]:
    """Upper and lower bounds on the extinction time of a zero-Dirichlet run.

    ``R`` is the radius carrying the data for the L^1-growth lower bound
    (default: the data support).  ``T`` overrides the fitted extinction time.
    """
    if traj.boundary_value != 0:
        raise PreconditionError("extinction bounds need zero boundary data")
    T = _extinction_time(traj, T)
    params, grid = traj.params, traj.grid
    m, d = params.m, params.d
    R_dom = grid.R_dom
    u0 = traj.snapshots[0]
    p_c = d * (1 - m) / 2
    out = []
    if R is None:
        positive = np.nonzero(u0.values > 0)[0]
        R = float(grid.radii[positive[-1] + 1]) if positive.size else R_dom / 2
    R = min(R, R_dom * (1 - 1e-9))

    if 0 < m < 1:
        K1 = lp_evolution_constant(params, 1.0, R, R_dom)
        lower = _mass(u0, traj, R) ** (1 - m) / K1
        out.append(make_report("extinction_bounds", lower, T, LE, {"R": R, "R0": R_dom, "p": 1},
                               "l1-growth-lower", notes=f"K={K1:.6g}"))
    if math.isclose(p, p_c, rel_tol=1e-12) and m < params.m_c and d >= 3:
        ks = extinction_constants(params)
        norm = lp_norm_ball(u0, grid, p_c, R_dom) ** ((1 - m) / p_c)
        for key, variant in (("K_pc", "pc-upper"), ("K_pc_sobolev", "pc-upper-sobolev")):
            out.append(make_report("extinction_bounds", T, norm / ks.value(key), LE,
                                   {"R0": R_dom, "p": p}, variant))
    elif p > max(p_c, 1.0) and d >= 3:
        Kp = extinction_constants(params, p, R_dom).value("K_p")
        norm = lp_norm_ball(u0, grid, p, R_dom) ** ((1 - m) / p)
        out.append(make_report("extinction_bounds", T, norm / Kp, LE, {"R0": R_dom, "p": p},
                               "p-upper", notes=f"K_p={Kp:.6g}"))
    if params.m_c < m < 1:
        good = good_range_constants(params)
        scale = R_dom ** (2 - d * (1 - m))
        low = good.value("c1") * _mass(u0, traj, R_dom / 3) ** (1 - m) * scale
        up = good.value("c2") * _mass(u0, traj, R_dom) ** (1 - m) * scale
        out.append(make_report("extinction_bounds", low, T, LE, {"R0": R_dom, "p": 1}, "good-lower"))
        out.append(make_report("extinction_bounds", T, up, LE, {"R0": R_dom, "p": 1}, "good-upper"))
    if not out:
        raise PreconditionError("no extinction bound applies to these parameters")
    return out


# ------------------------------------------------------------ L^p growth


def check_lp_evolution(
    traj_u: Trajectory,
    traj_v: Optional[Trajectory],
    p: float,
    R: float,
    R0: float,
    s: float,
    t: float,
    pair: bool = False,
) -> EstimateReport:
    """Local L^p growth: ``[∫_{B_R} u(t)^p]^{(1-m)/p} <= [∫_{B_R0} u(s)^p]^{(1-m)/p} + K (t - s)``.

    Pair mode (``traj_v`` given or ``pair=True`` for ``v = 0``) uses ``p = 1``
    on the difference ``u - v >= 0`` and allows either time order.
    """
    params = traj_u.params
    m = params.m
    inputs = {"t": t, "s": s, "R": R, "R0": R0, "p": p}
    _require_radius(traj_u, R0, "R0")
    for tt in (s, t):
        _require_time(traj_u, tt)
    if pair or traj_v is not None:
        _require_fast(traj_u, "the pair L^1 bound")
        if p != 1:
            raise PreconditionError("pair mode needs p = 1")

        def diff(tt):
            u = traj_u.snapshot_at(tt).values
            if traj_v is None:
                return u
            return u - traj_v.snapshot_at(tt).values

        if traj_v is not None:
            if traj_v.grid.n_cells != traj_u.grid.n_cells or traj_v.grid.R_dom != traj_u.grid.R_dom:
                raise PreconditionError("pair mode needs both runs on the same grid")
            common = [x for x in traj_v.times if traj_u.times[0] <= x <= traj_u.times[-1]]
            scale = max(float(traj_u.values.max()), 1e-300)
            if any(diff(x).min() < -1e-9 * scale for x in common + [s, t]):
                raise PreconditionError("pair mode needs v <= u")
        w_small = traj_u.grid.ball_weights(R)
        w_big = traj_u.grid.ball_weights(R0)
        K = lp_evolution_constant(params, 1.0, R, R0)
        lhs = max(float(np.dot(w_small, diff(t))), 0.0) ** (1 - m)
        rhs = max(float(np.dot(w_big, diff(s))), 0.0) ** (1 - m) + K * abs(t - s)
        return make_report("lp_evolution", lhs, rhs, LE, inputs, "pair", notes=f"K={K:.6g}")
    if s > t:
        raise PreconditionError("single-trajectory mode needs s <= t")
    K = lp_evolution_constant(params, p, R, R0)
    e = (1 - m) / p
    lhs = lp_norm_ball(traj_u.snapshot_at(t), traj_u.grid, p, R) ** e
    rhs = lp_norm_ball(traj_u.snapshot_at(s), traj_u.grid, p, R0) ** e + K * (t - s)
    return make_report("lp_evolution", lhs, rhs, LE, inputs, "single", notes=f"K={K:.6g}")


# -------------------------------------------------------------- smoothing


def _theta(params: FdeParams, p: float) -> float:
    return 1 / (2 * p - params.d * (1 - params.m))


def check_smoothing_upper(
    traj: Trajectory,
    p: float,
    t: float,
    R0: float,
    cylinder_variant: bool = False,
    R1: Optional[float] = None,
) -> EstimateReport:
    """Local sup bound by the initial L^p norm on ``B_R0`` plus a boundary term.

    Point form bounds ``u(t, 0)``.  The cylinder form bounds the sup over
    ``(t0, t] x B_R1`` with ``t0 = ((R0-R1)/(2 R0))^2 t`` and boundary term
    ``Cbar2 (t/ϱ^2)^{1/(1-m)}``, ``ϱ = (R0+R1)/2``.
    """
    params = traj.params
    m, d = params.m, params.d
    _require_radius(traj, R0, "R0")
    if not 0 < t:
        raise PreconditionError("need t > 0")
    _require_time(traj, t)
    theta = _theta(params, p)
    data = lp_norm_ball(traj.snapshots[0], traj.grid, p, R0) ** (2 * theta)
    inputs = {"t": t, "R0": R0, "p": p}
    if not cylinder_variant:
        mc = moser_constants(params, p)
        first = mc.value("C1") * t ** (-d * theta) * data
        second = mc.value("C2") * (t / R0**2) ** (1 / (1 - m))
        return make_report("smoothing_upper", _center(traj, t), first + second, LE, inputs, "point",
                           notes=f"data_term={first:.6g} boundary_term={second:.6g}")
    R1 = R0 / 2 if R1 is None else R1
    if not 0 < R1 < R0:
        raise PreconditionError("need 0 < R1 < R0")
    eps = (R0 - R1) / (R0 + R1)
    rho = (R0 + R1) / 2
    t0 = ((R0 - R1) / (2 * R0)) ** 2 * t
    mc = moser_constants(params, p, epsilon=eps)
    cyl = Cylinder(t0 * (1 + 1e-12), t, R1)
    try:
        sup = extremum_on_cylinder(traj, cyl, "sup").value
    except DomainError:
        sup = _sup_ball(traj, t, R1)
    sup = max(sup, _sup_ball(traj, t, R1))
    first = mc.value("Cbar1") * t ** (-d * theta) * data
    second = mc.value("Cbar2") * (t / rho**2) ** (1 / (1 - m))
    inputs.update({"R": R1, "s": t0})
    return make_report("smoothing_upper", sup, first + second, LE, inputs, "cylinder",
                       notes=f"eps={eps:.6g} data_term={first:.6g} boundary_term={second:.6g}")


def _cap_fraction(a: np.ndarray, d: int) -> np.ndarray:
    """Fraction of the unit sphere in R^d with ``cos(angle) >= a``."""
    a = np.clip(a, -1.0, 1.0)
    half = 0.5 * betainc((d - 1) / 2, 0.5, 1 - a**2)
    return np.where(a >= 0, half, 1 - half)


def ball_integral_offcenter(
    f: Callable[[np.ndarray], np.ndarray], d: int, center_radius: float, R0: float, n: int = 4001
) -> float:
    """``∫_{B_R0(x)} f(|y|) dy`` for ``|x| = center_radius > R0`` (radial ``f``)."""
    if center_radius <= R0:
        raise PreconditionError("the ball must avoid the origin")
    r = np.linspace(center_radius - R0, center_radius + R0, n)
    c = center_radius
    a = (r**2 + c**2 - R0**2) / (2 * r * c)
    area = d * unit_ball_volume(d) * r ** (d - 1)
    vals = f(r) * area * _cap_fraction(a, d)
    return float(trapezoid(vals, r))


def check_smoothing_offcenter(
    sol: ExactSolution, center_radius: float, p: float, t: float, R0: float, R1: float,
    n_times: int = 64,
) -> EstimateReport:
    """Cylinder smoothing bound for a radial exact solution on a ball ``B_R0(x)`` off the origin.

    Assumes the solution is nonincreasing in ``|y|`` and in time, so the sup
    over ``B_R1(x)`` sits at ``|y| = |x| - R1`` and at the earliest time.
    """
    params = sol.params
    m, d = params.m, params.d
    theta = _theta(params, p)
    eps = (R0 - R1) / (R0 + R1)
    rho = (R0 + R1) / 2
    t0 = ((R0 - R1) / (2 * R0)) ** 2 * t
    times = np.linspace(t0, t, n_times)[1:]
    near = np.array([center_radius - R1])
    sup = max(float(sol(tt, near)[0]) for tt in times)
    data = ball_integral_offcenter(lambda r: sol(0.0, r) ** p, d, center_radius, R0) ** (2 * theta)
    mc = moser_constants(params, p, epsilon=eps)
    first = mc.value("Cbar1") * t ** (-d * theta) * data
    second = mc.value("Cbar2") * (t / rho**2) ** (1 / (1 - m))
    return make_report(
        "smoothing_upper", sup, first + second, LE,
        {"t": t, "s": t0, "R": R1, "R0": R0, "p": p}, f"cylinder-offcenter({sol.kind})",
        notes=f"center_radius={center_radius:g}",
    )


# ---------------------------------------------------------------- Harnack


def _harnack_data(traj: Trajectory, t0: float, R: float, p: float) -> tuple[float, float]:
    """Mass and ``∫ u^p`` of ``u(t0)`` on ``B_R``."""
    snap = traj.snapshot_at(t0)
    return _mass(snap, traj, R), lp_norm_ball(snap, traj.grid, p, R)


def _shift_times(t: float, theta: float) -> dict:
    return {"forward": t + theta, "backward": t - theta, "elliptic": t}


def check_harnack(
    traj: Trajectory,
    variant: str,
    t: float,
    theta: float,
    R: float,
    p: float = 2.0,
    epsilon: float = 0.25,
    t0: float = 0.0,
) -> list[EstimateReport]:
    """Harnack bounds on ``B_R`` around the origin, one report per time shift.

    ``initial``: ``inf_{B_R} u(t±θ) >= H u(t, 0)`` with base time 0 and ``θ < t/2``.
    ``intrinsic`` / ``good-range``: ``inf_{B_R} u(s) >= h1 ε^a ρ^{2pϑ+1/m} u(t, 0)``
    for ``t0 + ε t_* < s < t0 + t_*``; ``good-range`` takes ``p = 1``.
    ``alternative``: ``sup_{B_R} u(t) <= C1 (t-t0)^{-dϑ} (∫_{B_2R} u(t0)^p)^{2ϑ} + C2 ρ^{-1/m} inf_{B_R} u(s)``.
    Backward shifts carry the factor ``((s-t0)/(t-t0))^{1/(1-m)}`` from the time
    monotonicity of the lower bound.
    """
    if variant not in HARNACK_VARIANTS:
        raise ValueError(f"unknown Harnack variant {variant!r}")
    _require_fast(traj, "the Harnack bounds")
    params = traj.params
    m, d = params.m, params.d
    if traj.grid.R_dom < 6 * R * (1 - 1e-12):
        raise PreconditionError("Harnack geometry needs a domain radius of at least 6R")
    if theta < 0:
        raise PreconditionError("theta must be nonnegative")
    if variant == "initial":
        t0 = 0.0
    if variant == "good-range":
        if not params.m_c < m < 1:
            raise PreconditionError("the good-range variant needs m_c < m < 1")
        if t0 != 0:
            raise PreconditionError("the good-range variant starts from the initial data")
        if traj.boundary_value != 0:
            raise PreconditionError("the good-range variant needs zero boundary data")
        _require_support(traj, R)
        p = 1.0
    hc = harnack_constants(params, p)
    M0, Ip = _harnack_data(traj, t0, R, p)
    if M0 <= 0:
        raise PreconditionError("no mass in B_R at the base time")
    t_star = hc.value("h2") * R ** (2 - d * (1 - m)) * M0 ** (1 - m)
    vartheta = _theta(params, p)
    a = 2 * p * vartheta / (1 - m)
    shifts = _shift_times(t, theta)
    inputs = {"t": t, "R": R, "p": p, "theta": theta, "epsilon": epsilon, "t0": t0}
    notes_common = f"t_star={t_star:.6g}"

    if variant == "initial":
        if not (0 < t <= t_star and t - theta > t / 2 and t + theta <= t_star * (1 + 1e-12)):
            raise PreconditionError(
                f"initial window needs 0 < t <= t_* = {t_star:g}, t/2 < t-θ and t+θ <= t_*"
            )
        T = _extinction_time(traj)
        N_term = Ip ** (2 * vartheta)
        H = (
            hc.value("C6") * R ** ((2 - d) / m) * (M0 / T ** (1 / (1 - m))) ** (1 / m)
            / (N_term / t ** (a) + R ** (-2 / (1 - m)))
        )
        rhs_base = H * _center(traj, t)
        return [
            make_report("harnack", _inf_ball(traj, s, R), rhs_base, GE,
                        {**inputs, "s": s}, f"initial:{k}", notes=f"{notes_common} H={H:.6g}")
            for k, s in shifts.items()
        ]

    lo, hi = t0 + (epsilon * t_star if variant != "alternative" else 0.0), t0 + t_star
    if not all(lo < s < hi for s in shifts.values()):
        which = "intrinsic" if variant != "alternative" else "alternative"
        raise PreconditionError(f"{which} window needs {lo:g} < t±θ < {hi:g}")
    for s in shifts.values():
        _require_time(traj, s)
    rho = M0 * R ** (d / p) / (Ip ** (1 / p) * R**d)
    out = []
    if variant in ("intrinsic", "good-range"):
        factor = hc.value("h1") * epsilon**a * rho ** (2 * p * vartheta + 1 / m)
        u_c = _center(traj, t)
        for k, s in shifts.items():
            back = min(1.0, (s - t0) / (t - t0)) ** (1 / (1 - m))
            out.append(make_report(
                "harnack", _inf_ball(traj, s, R), factor * back * u_c, GE, {**inputs, "s": s},
                f"{variant}:{k}", notes=f"{notes_common} ratio={rho:.6g} factor={factor:.6g}",
            ))
        return out
    # alternative
    I2 = lp_norm_ball(traj.snapshot_at(t0), traj.grid, p, 2 * R)
    first = hc.value("alt_C1") * (t - t0) ** (-d * vartheta) * I2 ** (2 * vartheta)
    sup = _sup_ball(traj, t, R)
    for k, s in shifts.items():
        back = max(1.0, (t - t0) / (s - t0)) ** (1 / (1 - m))
        second = hc.value("alt_C2") * rho ** (-1 / m) * back * _inf_ball(traj, s, R)
        out.append(make_report(
            "harnack", sup, first + second, LE, {**inputs, "s": s}, f"alternative:{k}",
            notes=f"{notes_common} data_term={first:.6g}",
        ))
    return out


# ------------------------------------------------------------- Aleksandrov


def check_aleksandrov(
    traj: Trajectory, R0: float, lam: float, times: Optional[Sequence[float]] = None
) -> EstimateReport:
    """``u(t, 0) >=`` average of ``u(t)`` over ``B_{λR0} \\ B_{2R0}``, worst case over ``times``."""
    if lam <= 2:
        raise PreconditionError("lambda must exceed 2")
    if traj.boundary_value != 0:
        raise PreconditionError("the reflection bound needs zero boundary data")
    _require_radius(traj, lam * R0, "lambda*R0")
    _require_support(traj, R0)
    ts = traj.times if times is None else np.asarray(times, dtype=float)
    worst = None
    for tt in ts:
        _require_time(traj, tt)
        snap = traj.snapshot_at(tt)
        lhs = float(snap.values[0])
        rhs = annulus_average(snap, traj.grid, 2 * R0, lam * R0)
        rep = make_report("aleksandrov", lhs, rhs, GE, {"t": float(tt), "R0": R0, "lambda": lam})
        if worst is None or rep.margin < worst.margin:
            worst = rep
    return dataclasses.replace(worst, notes=f"worst of {len(ts)} times")


# ------------------------------------------------------------- obstruction


@dataclass(frozen=True)
class ObstructionRow:
    k: float
    value: float
    l1_norm: float
    T_ratio: Optional[float]
    predicted_ratio: float


@dataclass(frozen=True)
class ObstructionResult:
    rows: tuple
    reports: tuple = field(default_factory=tuple)


def _unit_bump(params: FdeParams, support: float) -> Callable[[np.ndarray], np.ndarray]:
    d = params.d
    omega = unit_ball_volume(d)

    def raw(r):
        x = np.clip(1 - (np.asarray(r) / support) ** 2, 0.0, None)
        return x**3

    from scipy.integrate import quad

    mass = quad(lambda r: raw(r) * d * omega * r ** (d - 1), 0, support)[0]
    return lambda r: raw(r) / mass


def obstruction_demo(
    params: FdeParams,
    ks: Sequence[float],
    t0: float,
    R: float,
    x_proxy: Optional[float] = None,
    base: Optional[Trajectory] = None,
    R_dom: Optional[float] = None,
    opts: Optional[SolverOptions] = None,
    verify_k: Sequence[float] = (2.0,),
) -> ObstructionResult:
    """Concentrating data keep their L^1 norm on ``B_R`` while the value at a fixed point vanishes.

    The base run has unit mass supported in ``B_{R/2}``; ``u_k(t, x) = k^d u(k^{-σ} t, k x)``.
    For each ``k`` in ``verify_k`` the data ``k^d u0(k x)`` is also solved directly
    on ``B_{R_dom/k}`` to confirm ``T_k / T_1 = k^σ``.
    """
    m, d = params.m, params.d
    sigma = d * (1 - m) - 2
    if not (0 < m and sigma > 0):
        raise PreconditionError("the obstruction needs 0 < m < m_c")
    ks = [float(k) for k in ks]
    x_proxy = 0.6 * R if x_proxy is None else x_proxy
    R_dom = (max(ks) * x_proxy + R) if R_dom is None else R_dom
    opts = opts or SolverOptions(n_cells=400)
    bump = _unit_bump(params, R / 2)
    if base is None:
        base = solve_radial_dirichlet(params, bump, R_dom, opts)
    T1 = base.extinction.T_est if base.extinction else None
    rows = []
    for k in ks:
        fam = dirac_family(base, k)
        value = float(fam(t0, np.array([x_proxy]))[0])
        # ∫_{B_R} k^d u0(k x) dx = ∫_{B_{kR}} u0, evaluated on the base grid
        l1 = lp_norm_ball(base.snapshots[0], base.grid, 1, min(k * R, base.grid.R_dom))
        rows.append(ObstructionRow(k, value, l1, None, k**sigma))
    direct = {}
    for k in verify_k:
        kd = k**d
        run = solve_radial_dirichlet(params, lambda r, k=k: kd * bump(k * np.asarray(r)), R_dom / k, opts)
        if run.extinction is not None and T1:
            direct[k] = run.extinction.T_est / T1
    rows = [dataclasses.replace(r, T_ratio=direct.get(r.k)) for r in rows]

    base_row = rows[0]
    reports = []
    l1_dev = max(abs(r.l1_norm - base_row.l1_norm) for r in rows) / base_row.l1_norm
    reports.append(make_report("obstruction", l1_dev, 1e-6, LE, {"R": R}, "l1-constant",
                               tolerance=0.0))
    drops = [a.value - b.value for a, b in zip(rows, rows[1:])]
    min_drop = min(drops) if drops else 0.0
    reports.append(make_report("obstruction", min_drop, 0.0, GE, {"t": t0}, "strictly-decreasing",
                               tolerance=0.0, notes="min successive drop of u_k(t0, x0)"))
    frac = rows[-1].value / base_row.value if base_row.value > 0 else math.inf
    reports.append(make_report("obstruction", frac, 1e-3, LE, {"t": t0}, "final-fraction",
                               tolerance=0.0))
    h = float(np.max(np.diff(base.grid.radii)))
    interp_tol = max(h / R, 3 * opts.max_sup_change)
    for r in rows:
        if r.T_ratio is not None:
            reports.append(make_report(
                "obstruction", abs(r.T_ratio / r.predicted_ratio - 1), interp_tol, LE,
                {"p": r.k}, "extinction-scaling", tolerance=0.0,
                notes=f"T_k/T_1={r.T_ratio:.6g} k^sigma={r.predicted_ratio:.6g}",
            ))
    return ObstructionResult(tuple(rows), tuple(reports))


# ------------------------------------------------------------- structure


def check_structural(traj: Trajectory, companion: Optional[Trajectory] = None) -> list[EstimateReport]:
    """Nonnegativity, time monotonicity and, given a run with smaller data, ordering and L^1 contraction."""
    out = [make_report("structural", float(traj.values.min()), 0.0, GE, {}, "nonnegativity")]
    if 0 < traj.params.m < 1 and traj.boundary_value == 0:
        bc = benilan_crandall_margin(traj)
        out.append(make_report("structural", bc.violation, -1e-6, GE, {"t": bc.t},
                               "benilan-crandall", tolerance=0.0))
        masses = traj.values @ traj.grid.shell_volumes
        growth = float(np.max(np.diff(masses)) / masses[0]) if masses.size > 1 and masses[0] > 0 else 0.0
        out.append(make_report("structural", growth, 0.0, LE, {}, "mass-nonincreasing",
                               tolerance=1e-10))
    if companion is not None:
        ts = [x for x in traj.times if x <= companion.times[-1]]
        gap = min(float((traj.snapshot_at(x).values - companion.snapshot_at(x).values).min())
                  for x in ts)
        scale = float(traj.values.max())
        out.append(make_report("structural", gap / scale, 0.0, GE, {}, "comparison",
                               tolerance=1e-8))
        dist = np.array([float(np.dot(traj.grid.shell_volumes,
                                      np.abs(traj.snapshot_at(x).values - companion.snapshot_at(x).values)))
                         for x in ts])
        rise = float(np.max(np.diff(dist)) / dist[0]) if dist.size > 1 and dist[0] > 0 else 0.0
        out.append(make_report("structural", rise, 0.0, LE, {}, "l1-contraction", tolerance=1e-8))
    return out
