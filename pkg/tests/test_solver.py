import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdelab.core import WITHOUT_INVERSE_M, DomainError, FdeParams, PreconditionError, RadialGrid
from fdelab.exact import separable_profile, trajectory_interpolator, vss
from fdelab.solver import (
    SolverError,
    SolverOptions,
    benilan_crandall_margin,
    extinction_estimate,
    pde_residual,
    read_trajectory_csv,
    sidecar_path,
    solve_radial_dirichlet,
    write_trajectory_csv,
)

from .conftest import bump


@pytest.mark.parametrize(
    "kwargs",
    [dict(n_cells=1), dict(dt_init=0.0), dict(dt_min=1e-3, dt_init=1e-4), dict(value_floor=0.0),
     dict(extinction_threshold=1e-13), dict(boundary=-1.0), dict(snapshot_cadence=0), dict(max_sup_change=0.0)],
)
def test_options_validation(kwargs):
    with pytest.raises(PreconditionError):
        SolverOptions(**kwargs)


def test_zero_data_stays_zero():
    traj = solve_radial_dirichlet(FdeParams(0.5, 3), lambda r: 0 * r, 1.0, SolverOptions(n_cells=10, horizon=1.0))
    assert traj.extinction is None
    assert np.all(traj.values == 0)
    assert traj.times[-1] == 1.0


def test_negative_m_needs_positive_data():
    p = FdeParams(-0.5, 3)
    with pytest.raises(PreconditionError):
        solve_radial_dirichlet(p, bump, 3.0, SolverOptions(n_cells=20))
    with pytest.raises(PreconditionError):
        solve_radial_dirichlet(p, bump, 3.0, SolverOptions(n_cells=20, boundary=1.0))


def test_bad_array_data_rejected():
    with pytest.raises((PreconditionError, DomainError)):
        solve_radial_dirichlet(FdeParams(0.5, 3), np.ones(7), 1.0, SolverOptions(n_cells=10))


def test_step_failure_raises_solver_error():
    # a tiny dt_min with a forced Newton failure budget of one iteration
    opts = SolverOptions(n_cells=40, newton_max_iters=1, dt_min=1e-6, dt_init=1e-6, max_sup_change=1e-12)
    with pytest.raises(SolverError) as info:
        solve_radial_dirichlet(FdeParams(0.5, 3), bump, 2.0, opts)
    assert "t" in info.value.state


def test_separable_data_extinction_time():
    params = FdeParams(0.5, 3, WITHOUT_INVERSE_M)
    sol = separable_profile(params, 1.0).solution(1.0, WITHOUT_INVERSE_M)
    traj = solve_radial_dirichlet(params, lambda r: sol(0.0, r), 1.0, SolverOptions(n_cells=200))
    assert traj.extinction.T_est == pytest.approx(1.0, rel=0.02)
    assert traj.extinction.fit_quality < 1e-3
    again = extinction_estimate(traj)
    assert again.T_est == pytest.approx(traj.extinction.T_est, rel=0.02)


def test_separable_profile_decays_in_shape():
    params = FdeParams(0.5, 3, WITHOUT_INVERSE_M)
    sol = separable_profile(params, 1.0).solution(1.0, WITHOUT_INVERSE_M)
    traj = solve_radial_dirichlet(params, lambda r: sol(0.0, r), 1.0, SolverOptions(n_cells=200))
    t = 0.5
    snap = traj.snapshot_at(t)
    exact = sol(t, traj.grid.centers)
    assert np.max(np.abs(snap.values - exact)) < 0.01 * exact.max()


def test_positive_boundary_run_stays_above_boundary(negative_run):
    assert negative_run.values.min() >= 1.0 - 1e-9
    assert negative_run.extinction is None
    assert negative_run.boundary_kind.startswith("positive")
    assert negative_run.times[-1] == pytest.approx(0.05)


def test_benilan_crandall_on_zero_dirichlet(good_run, subcritical_run):
    for traj in (good_run, subcritical_run):
        assert benilan_crandall_margin(traj).violation > -1e-6


def test_mass_nonincreasing(good_run):
    w = good_run.grid.shell_volumes
    mass = good_run.values @ w
    assert np.all(np.diff(mass) <= 1e-10 * mass[0])


def test_snapshot_cadence_in_time():
    traj = solve_radial_dirichlet(FdeParams(0.7, 3), bump, 3.0, SolverOptions(n_cells=40, snapshot_cadence=0.1))
    gaps = np.diff(traj.times[:-1])
    assert np.all(gaps > 0.09)


def test_trajectory_csv_roundtrip(tmp_path, good_run):
    path = tmp_path / "run.csv"
    write_trajectory_csv(good_run, path)
    assert sidecar_path(path).exists()
    back = read_trajectory_csv(path)
    assert np.array_equal(back.values, good_run.values)
    assert np.array_equal(back.times, good_run.times)
    assert back.params == good_run.params
    assert back.extinction.T_est == good_run.extinction.T_est


def test_residual_second_order_for_vss():
    params = FdeParams(0.25, 4)
    sol = vss(params, 1.0)
    res = [pde_residual(sol, params, RadialGrid.uniform(2.0, n, 4), [0.3], r_range=(0.5, 2.0)).max_residual
           for n in (100, 200)]
    assert 3.2 <= res[0] / res[1] <= 4.8


def test_residual_rejects_empty_range():
    params = FdeParams(0.25, 4)
    with pytest.raises(DomainError):
        pde_residual(vss(params, 1.0), params, RadialGrid.uniform(2.0, 10, 4), [0.3], r_range=(3.0, 4.0))


def test_interpolated_run_has_small_residual(good_run):
    # the stored run is itself a discrete solution: its residual is small away from t = 0
    f = trajectory_interpolator(good_run)
    T = good_run.extinction.T_est
    stats = pde_residual(f, good_run.params, good_run.grid, [0.3 * T], r_range=(0.0, 2.0), dt_fd=1e-4 * T)
    assert stats.max_residual < 5e-2 * good_run.center_value(0.0)


@settings(max_examples=8, deadline=None)
@given(st.floats(0.3, 1.0), st.floats(1.05, 2.0))
def test_l1_contraction_and_comparison(h, ratio):
    params = FdeParams(0.6, 3)
    opts = SolverOptions(n_cells=40, horizon=0.2)
    lo = solve_radial_dirichlet(params, lambda r: bump(r, h), 3.0, opts)
    hi = solve_radial_dirichlet(params, lambda r: bump(r, h * ratio), 3.0, opts)
    n = min(len(lo.times), len(hi.times))
    w = lo.grid.shell_volumes
    d0 = np.dot(w, np.abs(hi.values[0] - lo.values[0]))
    for t in np.linspace(0, 0.2, 5):
        a, b = lo.snapshot_at(t).values, hi.snapshot_at(t).values
        assert np.all(b >= a - 1e-9)
        assert np.dot(w, np.abs(b - a)) <= d0 * (1 + 1e-6)
    assert n >= 2


@settings(max_examples=6, deadline=None)
@given(st.floats(0.2, 0.9), st.integers(2, 4))
def test_nonnegative_and_extinguishes(m, d):
    traj = solve_radial_dirichlet(FdeParams(m, d), bump, 2.0, SolverOptions(n_cells=30))
    assert traj.values.min() >= 0
    assert traj.extinction is not None and math.isfinite(traj.extinction.T_est)
    assert traj.extinction.T_est >= traj.times[-1]
