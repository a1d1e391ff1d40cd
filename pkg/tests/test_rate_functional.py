import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import brownian
from gaussdelay import (
    ConditioningError,
    DelayModel,
    HistoryPath,
    ParameterError,
    RankError,
    build_grid,
    optimal_energy,
    optimal_path,
    path_energy,
    solve_F,
    solve_covariance_column,
    solve_covariance_diagonal,
    solve_mean,
    transition_time_scan,
)
from gaussdelay.rate_functional import SampledPath


def solved(model, history, T, N):
    grid = build_grid(model.tau, T, N)
    F = solve_F(model, grid)
    return grid, solve_mean(model, history, grid), F, solve_covariance_diagonal(model, F, grid)


@pytest.fixture(scope="module")
def toggle_fields(toggle, toggle_history):
    model, _ = toggle
    return (model,) + solved(model, toggle_history, 20, 500)


def test_energy_of_mean_is_zero(toggle_fields):
    model, grid, mean, _, _ = toggle_fields
    f = SampledPath(grid, mean.values[: grid.index(3.0) + 1])
    assert path_energy(model, mean, f) == 0.0


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.2, 3))
def test_brownian_straight_line_energy(q1, q2, T):
    model = brownian()
    grid = build_grid(1.0, T, 50)
    j = grid.horizon_index(T)
    Tg = j * grid.delta
    q = np.array([q1, q2])
    mean = solve_mean(model, HistoryPath.constant([0.0, 0.0], 1.0), grid)
    f = SampledPath(grid, np.outer(grid.points[: j + 1] / Tg, q))
    expect = q @ q / (2 * Tg)
    assert path_energy(model, mean, f) == pytest.approx(expect, rel=1e-6, abs=1e-12)


def test_brownian_bridge_path_and_energy():
    model = brownian()
    grid, mean, F, diag = solved(model, HistoryPath.constant([0.0, 0.0], 1.0), 2.0, 200)
    Q = np.array([0.5, -0.25])
    T = 1.0
    tp = optimal_path(mean, solve_covariance_column(model, F, T), diag.at(T), Q)
    s = grid.points[: grid.index(T) + 1]
    assert np.abs(tp.path.values - np.outer(s / T, Q)).max() <= 2 * grid.delta * np.abs(Q).max()
    # energy |q|^2 / (2T) to first order in dt
    assert abs(tp.energy - Q @ Q / (2 * T)) <= 2 * grid.delta * Q @ Q / T


def test_scalar_brownian_energy():
    model = DelayModel.centered([[0.0]], [[0.0]], [[1.0]], 1.0)
    grid, mean, _, diag = solved(model, HistoryPath.constant([0.0], 1.0), 3.0, 200)
    for T, q in [(0.5, 1.0), (2.0, -0.3)]:
        e = optimal_energy(mean, diag.at(T), [q], T)
        assert e == pytest.approx(q * q / (2 * T), rel=2 * grid.delta / T)


def test_target_at_mean_gives_mean(toggle_fields):
    model, grid, mean, F, diag = toggle_fields
    T = 3.0
    tp = optimal_path(mean, solve_covariance_column(model, F, T), diag.at(T), mean.at(T))
    assert tp.energy == 0.0
    assert np.allclose(tp.path.values, mean.values[: grid.index(T) + 1], atol=1e-15)


def test_toggle_published_path_energy(toggle_fields, toggle):
    model, grid, mean, F, diag = toggle_fields
    Q = np.array([0.0384, 1.3031]) - toggle[1].z
    T = 1.482
    tp = optimal_path(mean, solve_covariance_column(model, F, T), diag.at(T), Q)
    assert tp.energy == pytest.approx(0.0348, rel=0.03)
    assert np.allclose(tp.path.start, mean.values[0])


def test_toggle_eigen_aligned_energy(toggle_fields):
    model, grid, mean, F, diag = toggle_fields
    rho = diag.at(20.0)
    w, V = np.linalg.eigh(rho)
    Q = mean.at(20.0) + 0.3 * V[:, -1]
    assert optimal_energy(mean, rho, Q, 20.0) == pytest.approx(0.5 * 0.874 * 0.09, rel=0.03)


@pytest.mark.parametrize("T", [0.5, 1.482, 5.0, 20.0])
def test_endpoint_interpolation(toggle_fields, T):
    model, grid, mean, F, diag = toggle_fields
    rng = np.random.default_rng(int(T * 1000))
    Q = rng.normal(scale=0.3, size=2)
    tp = optimal_path(mean, solve_covariance_column(model, F, T), diag.at(T), Q)
    assert np.linalg.norm(tp.path.end - Q) <= 1e-8 * np.linalg.norm(Q)


def _sweep():
    rng = np.random.default_rng(11)
    Ts = [0.5, 1.0, 1.482, 2.0, 3.5, 5.0, 7.5, 10.0, 15.0, 20.0]
    return [(T, rng.uniform(-0.3, 0.3, size=2)) for T in Ts]


@pytest.mark.parametrize("T,Q", _sweep())
def test_path_energy_matches_closed_form(toggle_fields, T, Q):
    model, grid, mean, F, diag = toggle_fields
    tp = optimal_path(mean, solve_covariance_column(model, F, T), diag.at(T), Q)
    assert path_energy(model, mean, tp.path) == pytest.approx(tp.energy, rel=0.01)


@pytest.mark.parametrize("T", [1.482, 5.0])
def test_minimality_under_perturbation(toggle_fields, T):
    model, grid, mean, F, diag = toggle_fields
    Q = np.array([0.05, 0.28])
    tp = optimal_path(mean, solve_covariance_column(model, F, T), diag.at(T), Q)
    base = path_energy(model, mean, tp.path)
    j = grid.index(T)
    s = np.arange(j + 1) / j
    rng = np.random.default_rng(3)
    for amp in (1e-3, 1e-2, 5e-2):
        for _ in range(10):
            c = rng.normal(size=(3, 2))
            pert = amp * sum(np.outer(np.sin((k + 1) * np.pi * s), c[k]) for k in range(3))
            f = SampledPath(grid, tp.path.values + pert)
            assert path_energy(model, mean, f) >= base - 1e-6


@given(st.floats(-3, 3), st.floats(-1, 1), st.floats(-1, 1))
def test_quadratic_scaling(alpha, u1, u2):
    model = DelayModel.centered([[-1.0, 0.3], [0.0, -0.5]], [[0.2, 0.0], [0.1, -0.3]], [[1.0, 0.0], [0.4, 0.8]], 1.0)
    grid, mean, _, diag = solved(model, HistoryPath.constant([0.1, -0.1], 1.0), 2.0, 40)
    T = 1.5
    u = np.array([u1, u2])
    m = mean.at(T)
    e1 = optimal_energy(mean, diag.at(T), m + u, T)
    ea = optimal_energy(mean, diag.at(T), m + alpha * u, T)
    assert ea == pytest.approx(alpha ** 2 * e1, rel=1e-10, abs=1e-14)


def test_rank_deficient_sigma_rejected():
    model = DelayModel.centered(-np.eye(2), np.zeros((2, 2)), [[1.0, 1.0], [1.0, 1.0]], 1.0)
    grid = build_grid(1.0, 1.0, 10)
    mean = solve_mean(model, HistoryPath.constant([0.0, 0.0], 1.0), grid)
    with pytest.raises(RankError):
        path_energy(model, mean, SampledPath(grid, mean.values[:5]))


def test_mismatched_grids_rejected():
    model = brownian()
    h = HistoryPath.constant([0.0, 0.0], 1.0)
    mean = solve_mean(model, h, build_grid(1.0, 1.0, 10))
    other = build_grid(1.0, 1.0, 20)
    with pytest.raises(ParameterError):
        path_energy(model, mean, SampledPath(other, np.zeros((5, 2))))


def test_singular_rho_conditioning_error():
    model = brownian()
    grid, mean, F, diag = solved(model, HistoryPath.constant([0.0, 0.0], 1.0), 1.0, 10)
    with pytest.raises(ConditioningError):
        optimal_energy(mean, diag.values[0], [0.1, 0.1], 0.0)


def test_scan_brownian_decreasing():
    model = DelayModel.centered([[0.0]], [[0.0]], [[1.0]], 1.0)
    grid, mean, _, diag = solved(model, HistoryPath.constant([0.0], 1.0), 5.0, 50)
    scan = transition_time_scan(mean, diag, [0.7], 5.0)
    assert scan.at_horizon and math.isinf(scan.T_opt)
    e = scan.energies[~scan.excluded]
    assert np.all(np.diff(e) < 0)
    assert scan.excluded[0]


def test_scan_target_at_attractor(toggle, toggle_history):
    model, _ = toggle
    grid, mean, _, diag = solved(model, toggle_history, 20, 100)
    scan = transition_time_scan(mean, diag, [0.0, 0.0], 20)
    assert scan.at_horizon
    assert scan.energy < 1e-5


def test_scan_interior_minimum(toggle_fields):
    model, grid, mean, F, diag = toggle_fields
    # the fixed exit point straight above the stationary state
    scan = transition_time_scan(mean, diag, [0.0, 0.3], 20)
    assert not scan.at_horizon
    assert 0.5 < scan.T_opt < 5.0
    assert scan.energy == pytest.approx(np.nanmin(scan.energies))
