import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from olgins.core import (
    EndowmentProcess, GrowthProcess, Preferences, autarky, example1, make_params, qhat_matrix,
    three_state, upsilon_hat, validate,
)
from olgins.errors import InvalidParameters, NoNontrivialBound


def test_example1_primitives(ex1):
    assert np.allclose(ex1.s, [0.5, 0.7])
    assert np.allclose(ex1.pi, [0.5, 0.5])
    assert ex1.beta == ex1.delta == pytest.approx(np.exp(-1 / 75))


def test_validation_example1(ex1):
    rep = validate(ex1)
    assert rep.trace_qhat == pytest.approx(1.6446, abs=1e-4)
    assert rep.a3_slack == pytest.approx(0.0, abs=1e-12)
    assert rep.a4_gap == pytest.approx(-0.0844, abs=1e-4)
    assert rep.passed


def test_single_state_samuelson_root():
    b = 0.9
    p = make_params([0.6], [1.0], b, b)
    _, root = qhat_matrix(p)
    assert root == pytest.approx(b * 0.6 / 0.4, rel=1e-14)


def test_autarky_bounds_example1(ex1):
    aut = autarky(ex1)
    assert np.max(np.abs(aut.residuals(ex1))) < 1e-10
    assert aut.delta_varpi > 0
    assert aut.omega_max[1] < aut.omega_max[0] < 0
    assert np.all(np.diff(aut.omega_min) < 0)
    assert aut.gamma_bar == 1.0


def test_autarky_only_raises():
    p = make_params([0.45, 0.55], [0.5, 0.5], 0.5, 0.5)
    with pytest.raises(NoNontrivialBound):
        autarky(p)


@pytest.mark.parametrize("shares,probs", [
    ([0.7, 0.5], [0.5, 0.5]),
    ([0.5, 1.2], [0.5, 0.5]),
    ([0.5, 0.7], [0.6, 0.6]),
    ([0.5, 0.7], [0.5]),
])
def test_endowment_rejects_bad_input(shares, probs):
    with pytest.raises(InvalidParameters):
        EndowmentProcess(shares, probs)


def test_probabilities_renormalised_within_tolerance():
    e = EndowmentProcess([0.5, 0.7], [0.5, 0.5 + 5e-13])
    assert e.probs.sum() == pytest.approx(1.0, abs=1e-16)


def test_preferences_and_growth_validation():
    with pytest.raises(InvalidParameters):
        Preferences(1.2, 0.9)
    with pytest.raises(InvalidParameters):
        GrowthProcess(np.array([-1.0]), np.array([1.0]))
    g = GrowthProcess(np.array([0.8, 1.28]), np.array([0.5, 0.5]))
    assert g.harmonic_mean == pytest.approx(0.98462, abs=1e-5)
    assert g.mean == pytest.approx(1.04)


def test_three_state_config(three):
    assert np.allclose(three.s, [0.5, 0.625, 0.8125])
    assert validate(three).passed


shares = st.lists(st.floats(0.05, 0.95), min_size=1, max_size=4, unique=True).map(sorted)


@settings(max_examples=60, deadline=None)
@given(shares, st.floats(0.5, 0.999))
def test_qhat_rank_one_root_is_trace(s, beta):
    s = np.array(s)
    if np.any(np.diff(s) < 1e-6):
        return
    p = make_params(s, np.full(s.size, 1.0 / s.size), beta, beta)
    Q, root = qhat_matrix(p)
    assert np.linalg.matrix_rank(Q) == 1
    assert np.max(np.abs(np.linalg.eigvals(Q))) == pytest.approx(root, rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(shares, st.floats(0.8, 0.999))
def test_autarky_bounds_property(s, beta):
    s = np.array(s)
    if np.any(np.diff(s) < 1e-6):
        return
    p = make_params(s, np.full(s.size, 1.0 / s.size), beta, beta)
    if qhat_matrix(p)[1] <= 1.0 + 1e-6:
        with pytest.raises(NoNontrivialBound):
            autarky(p)
        return
    aut = autarky(p)
    assert np.max(np.abs(aut.residuals(p))) < 1e-10
    assert np.all(aut.omega_max > aut.omega_min)
    assert np.all(aut.omega_max < 0)
    if s.size > 1:
        assert np.all(np.diff(aut.omega_max) < 0)
    assert np.allclose(upsilon_hat(p), np.log(s) + beta * np.mean(np.log1p(-s)))


def test_example1_rejects_degenerate_spread():
    with pytest.raises(InvalidParameters):
        example1(eps=0.0)


def test_parameters_are_immutable(ex1):
    with pytest.raises(ValueError):
        ex1.s[0] = 0.1
    a, b = three_state(), three_state()
    assert np.array_equal(a.s, b.s) and np.array_equal(a.pi, b.pi)
