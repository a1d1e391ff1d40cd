import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import TOGGLE_SYM, TOGGLE_V, TOGGLE_W
from gaussdelay import (
    DomainError,
    NonlinearDelayModel,
    ParameterError,
    ToggleParams,
    build_lna,
    find_stationary_states,
    toggle_model,
)
from gaussdelay.lna import _fd_jacobians

SEEDS = [(0.05, 1.0), (1.0, 0.05), (0.33, 0.33)]


def linear_model(a, B, C, S, tau=1.0):
    a, B, C, S = (np.asarray(x, dtype=float) for x in (a, B, C, S))
    return NonlinearDelayModel(
        len(a),
        lambda x, xd: a + np.asarray(x) @ B.T + np.asarray(xd) @ C.T,
        lambda x, xd: S,
        tau,
        1.0,
    )


def test_production_at_zero():
    nl = toggle_model()
    f = nl.drift(np.array([0.0, 0.0]), np.array([0.0, 0.0]))
    assert f[0] == pytest.approx(0.73)


@given(st.floats(0, 3), st.floats(0, 3), st.floats(0, 3), st.floats(0, 3))
def test_toggle_swap_symmetry(x, y, xd, yd):
    nl = toggle_model()
    f = nl.drift(np.array([x, y]), np.array([xd, yd]))
    g = nl.drift(np.array([y, x]), np.array([yd, xd]))
    assert np.allclose(f, g[::-1], rtol=0, atol=0)
    D = nl.diffusion(np.array([x, y]), np.array([xd, yd]))
    E = nl.diffusion(np.array([y, x]), np.array([yd, xd]))
    assert np.allclose(np.diag(D), np.diag(E)[::-1])


def test_toggle_negative_radicand():
    nl = toggle_model()
    with pytest.raises(DomainError):
        nl.diffusion(np.array([-5.0, 0.0]), np.array([0.0, 0.0]))


def test_toggle_params_positive():
    with pytest.raises(ParameterError):
        ToggleParams(beta=-1.0)


def test_stationary_states_match_oracle():
    nl = toggle_model()
    states = find_stationary_states(nl, SEEDS)
    zs = sorted(tuple(s.z) for s in states)
    expect = sorted([(TOGGLE_V, TOGGLE_W), (TOGGLE_W, TOGGLE_V), (TOGGLE_SYM, TOGGLE_SYM)])
    assert len(zs) == 3
    for z, e in zip(zs, expect):
        assert np.allclose(z, e, atol=1e-9)
    for s in states:
        assert np.linalg.norm(nl.drift(s.z, s.z)) <= 1e-10 * (1 + np.linalg.norm(s.z))
        assert s.residual <= 1e-10 * (1 + np.linalg.norm(s.z))


def test_published_stationary_values():
    states = find_stationary_states(toggle_model(), SEEDS)
    got = {tuple(np.round(s.z, 4)) for s in states}
    assert got == {(0.0498, 1.0033), (1.0033, 0.0498), (0.3306, 0.3306)}


def test_stability_classification():
    states = find_stationary_states(toggle_model(), SEEDS)
    by_kind = {tuple(np.round(s.z, 3)): s.stability for s in states}
    assert by_kind[(0.05, 1.003)] == "stable"
    assert by_kind[(1.003, 0.05)] == "stable"
    assert by_kind[(0.331, 0.331)] == "saddle"


def test_duplicate_roots_merged():
    states = find_stationary_states(toggle_model(), [(0.05, 1.0), (0.06, 0.98), (0.04, 1.1)])
    assert len(states) == 1


@pytest.mark.parametrize("seed", [(50.0, -3.0), (-1.0, -1.0), (1e3, 1e3), (0.0, 0.0), (5.0, 5.0)])
def test_far_seeds_never_return_non_roots(seed):
    nl = toggle_model()
    for s in find_stationary_states(nl, [seed]):
        assert np.linalg.norm(nl.drift(s.z, s.z)) <= 1e-10 * (1 + np.linalg.norm(s.z))


def test_linear_model_single_root():
    a = np.array([1.0, -2.0])
    B = np.array([[-1.0, 0.2], [0.0, -0.5]])
    C = np.array([[0.1, 0.0], [0.3, -0.2]])
    states = find_stationary_states(linear_model(a, B, C, np.eye(2)), [(0, 0), (10, -10)])
    assert len(states) == 1
    assert np.allclose(states[0].z, -np.linalg.solve(B + C, a), atol=1e-10)


def test_lna_linear_model_returns_inputs():
    a = np.array([1.0, -2.0])
    B = np.array([[-1.0, 0.2], [0.0, -0.5]])
    C = np.array([[0.1, 0.0], [0.3, -0.2]])
    S = np.array([[1.0, 0.0], [0.5, 2.0]])
    nl = linear_model(a, B, C, S)
    (z,) = find_stationary_states(nl, [(0.0, 0.0)])
    lna = build_lna(nl, z)
    assert np.allclose(lna.B, B, atol=1e-8)
    assert np.allclose(lna.C, C, atol=1e-8)
    assert np.array_equal(lna.Sigma, S)
    assert np.all(lna.a == 0)


def test_toggle_lna_closed_form(toggle):
    model, state = toggle
    g = math.log(2.0)
    assert np.allclose(model.B, -g * np.eye(2))
    # 30-digit oracle values at (v, w)
    C = np.array([[0.0, -0.0655968143033674915513569211079], [-1.32069754681652312728310732181, 0.0]])
    S = np.diag([0.262839161934281070190195884659, 1.17937083860577321503442638978])
    assert np.allclose(model.C, C, rtol=1e-9, atol=1e-12)
    assert np.allclose(model.Sigma, S, rtol=1e-9, atol=1e-12)
    assert model.epsilon == pytest.approx(1 / math.sqrt(1000))
    assert np.all(model.a == 0)


def test_fd_matches_closed_form_jacobians():
    nl = toggle_model()
    for z in [(TOGGLE_V, TOGGLE_W), (TOGGLE_SYM, TOGGLE_SYM), (0.7, 0.2)]:
        z = np.array(z)
        fd = _fd_jacobians(nl, z, z)
        exact = nl.jacobians(z, z)
        for a, b in zip(fd, exact):
            scale = np.maximum(np.abs(b), 1e-12)
            mask = np.abs(b) > 0
            assert np.all(np.abs(a - b)[mask] / scale[mask] <= 1e-6)
            assert np.all(np.abs(a[~mask]) <= 1e-9)


def test_lna_swap_symmetry():
    nl = toggle_model()
    s1, s2 = find_stationary_states(nl, [(0.05, 1.0), (1.0, 0.05)])
    a, b = build_lna(nl, s1), build_lna(nl, s2)
    P = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(P @ a.B @ P, b.B)
    assert np.allclose(P @ a.C @ P, b.C, atol=1e-12)
    assert np.allclose(P @ a.Sigma @ P, b.Sigma)
