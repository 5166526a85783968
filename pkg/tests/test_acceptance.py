"""Acceptance criteria, one test per criterion.

Each test carries a ``criterion`` marker; the terminal summary prints one
PASS/FAIL line per criterion.  Criteria 2-7 and 10 read the bundled suite run
once at its default grid.
"""

import time

import numpy as np
import pytest
from scipy.linalg import eigh_tridiagonal

from fdelab import estimates as est
from fdelab import harness
from fdelab.constants import (
    harnack_constants,
    moser_recursion,
    poincare_constant,
    sobolev_bubble_quotient,
    sobolev_constant,
)
from fdelab.core import WITHOUT_INVERSE_M, FdeParams, RadialGrid
from fdelab.exact import rescale_to_unit, separable_profile, vss
from fdelab.solver import pde_residual

RESIDUAL_RATIO = (3.2, 4.8)
RESIDUAL_SECONDS = 10.0
SUITE_SECONDS = 120.0
EXTINCTION_REL = 0.02
FIT_QUALITY = 1e-3
CONSTANT_ORACLE = 1e-3
MOSER_LIMIT_ABS = 1e-6
COVARIANCE_REL = 1e-3
BC_VIOLATION = -1e-6


@pytest.fixture(scope="module")
def suite_run():
    start = time.perf_counter()
    bundle = harness.run_scenarios(harness.bundled_config_path())
    return bundle, time.perf_counter() - start


def _reports(bundle, scenario, name=None):
    return [rep for sid, rep in bundle.reports
            if sid == scenario and (name is None or rep.name == name)]


def _by_variant(reps):
    out = {}
    for rep in reps:
        out.setdefault(rep.variant, []).append(rep)
    return out


def _assert_all_hold(reps, what):
    bad = [(r.name, r.variant, r.inputs, r.margin, r.tolerance) for r in reps if not r.holds]
    assert reps, f"no reports for {what}"
    assert not bad, f"{what}: {bad}"


# --------------------------------------------------------------- criterion 1


def _residual_ratios(sol, params, R_dom, times, r_range, sizes=(100, 200, 400, 800)):
    res = []
    for n in sizes:
        start = time.perf_counter()
        stats = pde_residual(sol, params, RadialGrid.uniform(R_dom, n, params.d), times, r_range=r_range)
        assert time.perf_counter() - start < RESIDUAL_SECONDS
        res.append(stats.max_residual)
    return [a / b for a, b in zip(res, res[1:])]


@pytest.mark.criterion(1, "exact-solution residuals converge at second order")
def test_criterion_1_exact_residuals():
    p_vss = FdeParams(0.25, 4)
    ratios = _residual_ratios(vss(p_vss, 1.0), p_vss, 2.0, [0.3, 0.6], (0.5, 2.0))
    p_sep = FdeParams(0.5, 3, WITHOUT_INVERSE_M)
    sep = separable_profile(p_sep, 1.0).solution(1.0, WITHOUT_INVERSE_M)
    ratios += _residual_ratios(sep, p_sep, 1.0, [0.2, 0.5], (0.0, 0.8))
    lo, hi = RESIDUAL_RATIO
    assert all(lo <= q <= hi for q in ratios), ratios


# --------------------------------------------------------------- criterion 2


@pytest.mark.criterion(2, "separable data recover T1 within 2% with an affine extinction fit")
def test_criterion_2_extinction_oracle(suite_run):
    bundle, _ = suite_run
    assert bundle.provenance["grids"]["separable"] == 400
    reps = _by_variant(_reports(bundle, "separable", "extinction_oracle"))
    (rel,) = reps["relative-error"]
    (fit,) = reps["fit-quality"]
    assert rel.lhs <= EXTINCTION_REL and rel.tolerance == 0
    assert fit.lhs < FIT_QUALITY and fit.tolerance == 0


# --------------------------------------------------------------- criterion 3


@pytest.mark.criterion(3, "extinction-time bounds bracket the measured extinction time")
def test_criterion_3_extinction_sandwich(suite_run):
    bundle, _ = suite_run
    good = _by_variant(_reports(bundle, "good-range", "extinction_bounds"))
    sub = _by_variant(_reports(bundle, "subcritical", "extinction_bounds"))
    wanted = [good["good-lower"], good["good-upper"], sub["pc-upper"], sub["l1-growth-lower"]]
    for reps in wanted:
        # the only slack is the fine/coarse discretization tolerance
        _assert_all_hold(reps, reps[0].variant)
        assert all(r.raw_holds or r.margin >= -r.tolerance for r in reps)


# --------------------------------------------------------------- criterion 4


@pytest.mark.criterion(4, "flux, positivity and two-term mass bounds hold on the subcritical run; suite under 2 minutes")
def test_criterion_4_flux_and_positivity(suite_run):
    bundle, seconds = suite_run
    assert seconds < SUITE_SECONDS
    lower_bounds = ("flux_lemma", "critical_time", "positivity_lower", "ac_lower")
    reps = [r for r in _reports(bundle, "subcritical") if r.name in lower_bounds]
    _assert_all_hold(reps, "flux and positivity")
    assert {"T-form", "pc-form"} <= {r.variant for r in reps if r.name == "ac_lower"}
    assert len([r for r in reps if r.name == "flux_lemma"]) >= 3
    assert [r for r in reps if r.name == "critical_time"]
    assert not [s for s in bundle.skipped if s.scenario_id == "subcritical"]


# --------------------------------------------------------------- criterion 5


@pytest.mark.criterion(5, "Lp evolution and smoothing hold on all canonical runs")
def test_criterion_5_growth_and_smoothing(suite_run):
    bundle, _ = suite_run
    for sid, m, d in (("good-range", 0.7, 3), ("subcritical", 0.25, 4)):
        lp = _reports(bundle, sid, "lp_evolution")
        _assert_all_hold(lp, f"{sid} lp_evolution")
        p_c = d * (1 - m) / 2
        assert {1.0, 2.0, max(1.0, p_c + 0.5)} <= {r.inputs["p"] for r in lp}
    neg = _reports(bundle, "negative", "lp_evolution")
    _assert_all_hold(neg, "negative lp_evolution")
    assert 2.0 in {r.inputs["p"] for r in neg}
    for sid in ("good-range", "subcritical", "negative"):
        sm = _reports(bundle, sid, "smoothing_upper")
        _assert_all_hold(sm, f"{sid} smoothing")
        assert {"point", "cylinder"} <= {r.variant for r in sm}


# --------------------------------------------------------------- criterion 6


def _harnack_factor(traj, R=1.0):
    """``rhs / u(t, 0)`` of the elliptic p = 1 report, in the middle of the window."""
    params = traj.params
    M0 = float(np.dot(traj.grid.ball_weights(R), traj.snapshots[0].values))
    ts = harnack_constants(params, 1.0).value("h2") * R ** (2 - params.d * (1 - params.m)) * M0 ** (1 - params.m)
    t = 0.6 * ts
    reps = {r.variant: r for r in est.check_harnack(traj, "good-range", t, 0.2 * ts, R)}
    rep = reps["good-range:elliptic"]
    return rep.rhs / traj.center_value(t), rep.holds


@pytest.mark.criterion(6, "Harnack bounds hold in every variant; p = 1 factor is data independent")
def test_criterion_6_harnack(suite_run, good_run, good_run_half):
    bundle, _ = suite_run
    for sid, variants in (("good-range", ("initial", "intrinsic", "alternative", "good-range")),
                          ("subcritical", ("initial", "intrinsic", "alternative"))):
        reps = _reports(bundle, sid, "harnack")
        _assert_all_hold(reps, f"{sid} harnack")
        found = {r.variant for r in reps}
        for v in variants:
            assert {f"{v}:forward", f"{v}:backward", f"{v}:elliptic"} <= found, (sid, v)
    f_full, ok_full = _harnack_factor(good_run)
    f_half, ok_half = _harnack_factor(good_run_half)
    assert ok_full and ok_half
    assert f_half == pytest.approx(f_full, rel=1e-12)


# --------------------------------------------------------------- criterion 7


@pytest.mark.criterion(7, "concentrating data: point values vanish at fixed L1 norm")
def test_criterion_7_obstruction(suite_run):
    bundle, _ = suite_run
    reps = _by_variant(_reports(bundle, "subcritical", "obstruction"))
    assert {"l1-constant", "strictly-decreasing", "final-fraction", "extinction-scaling"} <= set(reps)
    _assert_all_hold([r for group in reps.values() for r in group], "obstruction")
    (l1,) = reps["l1-constant"]
    assert l1.rhs == 1e-6 and l1.tolerance == 0
    (final,) = reps["final-fraction"]
    assert final.lhs < 1e-3
    (drop,) = reps["strictly-decreasing"]
    assert drop.lhs > 0


# --------------------------------------------------------------- criterion 8


def _variational_poincare(d, n=4000):
    """Smallest Dirichlet eigenvalue on the unit ball from a weighted radial finite-volume Rayleigh quotient."""
    h = 1.0 / n
    faces = np.arange(1, n + 1) * h
    centers = (np.arange(n) + 0.5) * h
    w = centers ** (d - 1) * h
    k = faces ** (d - 1) / h
    diag = k.copy()
    diag[1:] += k[:-1]
    diag[-1] = k[-2] + 2 * k[-1]  # Dirichlet value on the outer face
    off = -k[:-1]
    s = 1 / np.sqrt(w)
    lam = eigh_tridiagonal(diag * s * s, off * s[:-1] * s[1:], select="i", select_range=(0, 0),
                           eigvals_only=True)[0]
    return 1 / np.sqrt(lam)


@pytest.mark.criterion(8, "Sobolev/Poincare oracles agree; Moser recursion fixed point and limit")
def test_criterion_8_constants():
    s2 = sobolev_constant(3)
    assert s2 == pytest.approx(0.4272, abs=1e-4)
    assert abs(sobolev_bubble_quotient(3) - s2) <= CONSTANT_ORACLE * s2
    P = poincare_constant(3)
    assert P == pytest.approx(1 / np.pi, rel=1e-12)
    assert abs(_variational_poincare(3) - P) <= CONSTANT_ORACLE * P
    eps = np.finfo(float).eps
    for m, d in ((0.25, 4), (0.1, 3), (-0.5, 3), (0.4, 6)):
        params = FdeParams(m, d)
        p_c = d * (1 - m) / 2
        assert abs(moser_recursion(params, p_c, 1)[1] - p_c) <= 4 * eps * p_c
        for p0 in (p_c + 0.5, p_c + 2.0):
            seq = moser_recursion(params, p0, 201)
            q = d / 2
            limit = (1 + 1 / q) ** 200 / seq[200]
            assert abs(limit - 1 / (p0 - q * (1 - m))) <= MOSER_LIMIT_ABS


# --------------------------------------------------------------- criterion 9


def _predicted_factor(rep, params, A, L):
    """Scaling of the compared quantity under u -> A u(t/tau, x/L), tau = L^2 A^(1-m)."""
    m, d = params.m, params.d
    tau = L**2 * A ** (1 - m)
    if rep.name in ("critical_time", "extinction_bounds"):
        return tau
    if rep.name == "flux_lemma":
        return A * L ** (d + 2)
    if rep.name == "lp_evolution":
        p = rep.inputs["p"]
        return (A**p * L**d) ** ((1 - m) / p)
    if rep.name == "positivity_lower" and rep.variant == "T-form":
        return A**m
    if rep.name == "structural":
        return 1.0
    return A


def _all_checks(traj, half, tau, L):
    params = traj.params
    m, d = params.m, params.d
    T = traj.extinction.T_est / tau
    out = [est.check_flux_lemma(traj, L, 3 * L, 0.25 * T * tau), est.check_critical_time(traj, L, 3 * L)]
    t_star = float(out[-1].notes.split("=")[1])
    out.append(est.check_positivity_lower(traj, 0.5 * t_star, L, 3 * L))
    if params.m_c < m:
        out.append(est.check_positivity_lower(traj, 0.5 * t_star, L, 3 * L, "good-range"))
    out.append(est.check_ac_lower(traj, 0.3 * T * tau, L, "T-form", 3 * L))
    if m < params.m_c:
        out.append(est.check_ac_lower(traj, 0.3 * T * tau, L, "pc-form", 3 * L))
    out += est.check_extinction_bounds(traj, 2.0, L)
    for p in (1.0, 2.0):
        out.append(est.check_lp_evolution(traj, None, p, L, 2 * L, 0.0, 0.25 * T * tau))
    out.append(est.check_lp_evolution(traj, half, 1.0, L, 2 * L, 0.0, 0.25 * T * tau))
    for cyl in (False, True):
        out.append(est.check_smoothing_upper(traj, 2.0, 0.5 * T * tau, 2 * L, cylinder_variant=cyl))
    M0 = float(np.dot(traj.grid.ball_weights(L), traj.snapshots[0].values))
    ts = harnack_constants(params, 2.0).value("h2") * L ** (2 - d * (1 - m)) * M0 ** (1 - m)
    out += est.check_harnack(traj, "initial", 0.5 * ts, 0.125 * ts, L)
    out += est.check_harnack(traj, "intrinsic", 0.6 * ts, 0.2 * ts, L)
    out += est.check_harnack(traj, "alternative", 0.6 * ts, 0.2 * ts, L)
    if params.m_c < m:
        ts1 = harnack_constants(params, 1.0).value("h2") * L ** (2 - d * (1 - m)) * M0 ** (1 - m)
        out += est.check_harnack(traj, "good-range", 0.6 * ts1, 0.2 * ts1, L)
    out.append(est.check_aleksandrov(traj, L, 6.0))
    out += est.check_structural(traj, half)
    return out


@pytest.mark.criterion(9, "holds flags are scale invariant; margins scale by predicted powers")
@pytest.mark.parametrize("mass, radius", [(3.7, 0.6), (0.05, 2.5)])
def test_criterion_9_scale_covariance(good_run, good_run_half, subcritical_run, mass, radius):
    # the subcritical run has no smaller companion; it pairs with itself
    for traj, half in ((good_run, good_run_half), (subcritical_run, subcritical_run)):
        params = traj.params
        sc = rescale_to_unit(mass, radius, params)
        A, L, tau = sc.amplitude, sc.length, sc.tau
        scaled = sc.trajectory_from_unit(traj)
        scaled_half = sc.trajectory_from_unit(half)
        base = _all_checks(traj, half, 1.0, 1.0)
        moved = _all_checks(scaled, scaled_half, tau, L)
        assert len(base) == len(moved) > 20
        for a, b in zip(base, moved):
            assert (a.name, a.variant) == (b.name, b.variant)
            assert a.holds == b.holds, (a.name, a.variant)
            factor = _predicted_factor(a, params, A, L)
            for x, y in ((a.lhs, b.lhs), (a.rhs, b.rhs), (a.margin, b.margin)):
                if abs(x) > 1e-12 * max(abs(a.lhs), abs(a.rhs), 1e-300):
                    assert y / x == pytest.approx(factor, rel=COVARIANCE_REL), (a.name, a.variant)


# -------------------------------------------------------------- criterion 10


@pytest.mark.criterion(10, "structural invariants on every zero-Dirichlet suite run")
def test_criterion_10_structural(suite_run):
    bundle, _ = suite_run
    suite = harness.load_config(harness.bundled_config_path())
    zero_dirichlet = [sc.id for sc in suite.scenarios
                      if sc.data != "vss-sample" and sc.solver.boundary == 0]
    assert set(zero_dirichlet) == {"good-range", "subcritical", "separable"}
    for sid in zero_dirichlet:
        reps = _by_variant(_reports(bundle, sid, "structural"))
        assert {"nonnegativity", "benilan-crandall", "comparison", "l1-contraction"} <= set(reps), sid
        _assert_all_hold([r for group in reps.values() for r in group], f"{sid} structural")
        (bc,) = reps["benilan-crandall"]
        assert bc.lhs > BC_VIOLATION
