import numpy as np
import pytest
from hypothesis import given, strategies as st

from gaussdelay import (
    DelayModel,
    DomainError,
    HistoryPath,
    ParameterError,
    RankError,
    build_grid,
    eval_history,
    validate_model,
)


def test_grid_size_and_points():
    g = build_grid(1.0, 20, 500)
    assert g.M == 500 * 21
    assert g.delta == pytest.approx(0.002)
    assert g.points[0] == 0.0
    assert g.points[-1] == pytest.approx(21.0)
    assert g.horizon_index(20) == 10000
    assert g.index(1.482) == 741


def test_grid_integer_horizon_guard():
    # 3 * 0.1 / 0.1 lands a hair under 3 in floating point
    g = build_grid(0.1, 0.30000000000000004 - 1e-16, 10)
    assert g.M == 40


@pytest.mark.parametrize("T,tau,N", [(0, 1, 10), (1, 0, 10), (1, 1, 1), (1, 1, 2.5), (-1, 1, 10)])
def test_grid_rejects_bad_input(T, tau, N):
    with pytest.raises(ParameterError):
        build_grid(tau, T, N)


def test_grid_index_off_grid():
    g = build_grid(1.0, 2.0, 10)
    with pytest.raises(ParameterError):
        g.index(0.05)
    with pytest.raises(ParameterError):
        g.index(5.0)


@given(st.integers(2, 400), st.floats(0.05, 30), st.floats(0.1, 3))
def test_grid_covers_horizon(N, T, tau):
    g = build_grid(tau, T, N)
    assert g.M % N == 0
    assert g.end >= T - 1e-9 * max(1, T)
    assert g.end < T + tau + 1e-9


def test_history_constant_and_interp():
    h = HistoryPath.constant([1.0, 2.0], 1.0)
    assert np.allclose(h(-0.3), [1.0, 2.0])
    assert h.is_constant()
    lin = HistoryPath([-1.0, 0.0], [[0.0], [2.0]])
    assert np.allclose(eval_history(lin, [-1.0, -0.5, 0.0]), [[0.0], [1.0], [2.0]])
    assert np.allclose(lin.start, [2.0])


def test_history_out_of_range():
    h = HistoryPath.constant([1.0], 1.0)
    with pytest.raises(DomainError):
        h(0.5)
    with pytest.raises(DomainError):
        h(-1.5)


def test_history_rejects_unsorted():
    with pytest.raises(ParameterError):
        HistoryPath([0.0, -1.0], [[0.0], [1.0]])


def test_validate_model_reports_problems():
    m = DelayModel([0.0, 0.0], np.eye(2), np.eye(3), np.eye(2), -1.0)
    rep = validate_model(m, HistoryPath.constant([0.0], 1.0))
    assert not rep.valid
    text = " ".join(rep.errors)
    assert "C has shape" in text and "tau" in text and "dimension" in text


def test_validate_model_rank():
    m = DelayModel.centered(np.eye(2), np.zeros((2, 2)), [[1.0, 1.0], [1.0, 1.0]], 1.0)
    rep = validate_model(m, HistoryPath.constant([0.0, 0.0], 1.0))
    assert rep.valid and not rep.full_rank
    with pytest.raises(RankError):
        m.require_full_rank()


def test_model_is_read_only():
    m = DelayModel.centered(np.eye(2), np.zeros((2, 2)), np.eye(2), 1.0)
    with pytest.raises(ValueError):
        m.B[0, 0] = 5.0


@pytest.mark.parametrize("tau,T,N,M", [(1.0, 2.5, 4, 12), (1.0, 2.0, 500, 1500), (1.0, 20.0, 500, 10500)])
def test_grid_formula(tau, T, N, M):
    g = build_grid(tau, T, N)
    assert g.M == M
    assert g.delta == pytest.approx(tau / N)
    assert g.points[1] == pytest.approx(tau / N) and g.points[-1] == pytest.approx(M * tau / N)


@given(
    st.lists(st.floats(-5, 5), min_size=3, max_size=8),
    st.integers(0, 5),
    st.floats(0, 1),
)
def test_history_affine_between_nodes(vals, k, alpha):
    n = len(vals)
    times = np.linspace(-1.0, 0.0, n)
    h = HistoryPath(times, np.array(vals)[:, None])
    k = k % (n - 1)
    t1, t2 = times[k], times[k + 1]
    mid = h(alpha * t1 + (1 - alpha) * t2)
    assert mid == pytest.approx(alpha * h(t1) + (1 - alpha) * h(t2), abs=1e-12)
    assert h(t1)[0] == vals[k]


def test_validate_zero_sigma_and_partial_history():
    m = DelayModel.centered(np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)), 1.0)
    rep = validate_model(m, HistoryPath.constant([0.0, 0.0], 1.0))
    assert rep.valid and not rep.full_rank
    partial = HistoryPath([-0.5, 0.0], [[0.0, 0.0], [1.0, 1.0]])
    rep = validate_model(m, partial)
    assert not rep.valid and not rep.history_covers


def test_validate_toggle_lna(toggle, toggle_history):
    model, _ = toggle
    rep = validate_model(model, toggle_history)
    assert rep.valid and rep.full_rank
    assert np.allclose(toggle_history(0.0) + toggle[1].z, [0.0453, 1.1323])
