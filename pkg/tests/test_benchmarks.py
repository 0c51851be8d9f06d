import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from olgins.benchmarks import deterministic_solve, first_best
from olgins.core import Preferences, example1
from olgins.errors import AutarkyOnly, DomainError

B = float(np.exp(-1 / 75))


def test_first_best_example1(ex1):
    fb = first_best(ex1)
    assert np.allclose(fb.c_star, 0.5)
    assert np.allclose(fb.omega_star, np.log(0.5))
    assert fb.d_star[0] == pytest.approx(0.0, abs=1e-15)
    assert fb.d_star[1] == pytest.approx(1 - 0.5 / 0.7, abs=1e-15)


def test_first_best_three_state(three):
    fb = first_best(three)
    assert np.allclose(fb.c_star, 0.5)
    assert np.allclose(fb.d_star, [0.0, 0.2, 1 - 0.5 / 0.8125])


def test_first_best_bond_revenue_at_zero(ex1):
    assert float(first_best(ex1).bond_revenue(0.0)) == pytest.approx(0.1974, abs=1e-4)


def test_first_best_value_shape(ex1):
    fb = first_best(ex1)
    x = np.linspace(np.log(0.3), np.log(0.6), 400)
    V = fb.value(1, x)
    assert np.all(np.diff(V) <= 1e-15)
    assert np.all(np.diff(V, 2) <= 1e-12)
    flat = x <= fb.omega_star[1]
    assert np.allclose(V[flat], fb.v_star[1] + fb.delta * fb.V_bar_star)


def test_deterministic_example():
    det = deterministic_solve(0.6, Preferences(B, B))
    resid = np.log(det.c_min) + B * np.log1p(-det.c_min) - (np.log(0.6) + B * np.log(0.4))
    assert abs(resid) < 1e-12
    assert det.c_min < det.c_star == 0.5
    assert det.first_best_sustainable
    assert det.omega_c > det.omega_star


def test_deterministic_flat_section_and_descent():
    det = deterministic_solve(0.6, Preferences(B, B))
    x = np.linspace(det.omega_min, det.omega_c, 50)
    assert np.allclose(det.policy(x), det.omega_star)
    path, T = det.path(det.omega_max_det - 1e-3)
    assert T > 0 and path[-1] == pytest.approx(det.omega_target)
    assert np.all(np.diff(path) < 0)


def test_deterministic_policy_increasing_convex():
    det = deterministic_solve(0.7, Preferences(B, B))
    x = np.linspace(det.omega_c + 1e-6, det.omega_max_det - 1e-6, 300)
    g = det.policy(x)
    assert np.all(np.diff(g) > 0)
    assert np.all(np.diff(g, 2) >= -1e-12)


def test_deterministic_value():
    det = deterministic_solve(0.6, Preferences(B, B))
    lo = np.linspace(det.omega_min, det.omega_star, 5)
    assert np.allclose(det.value(lo), det._v_stat())
    hi = np.linspace(det.omega_star + 1e-3, det.omega_max_det - 1e-4, 40)
    V = det.value(hi)
    assert np.all(np.diff(V) < 0)
    h = [1e-3, 1e-4, 1e-5]
    slopes = [(det.value(det.omega_max_det) - det.value(det.omega_max_det - e)) / e for e in h]
    assert slopes[0] > slopes[1] > slopes[2]


def test_deterministic_errors():
    with pytest.raises(AutarkyOnly):
        deterministic_solve(0.45, Preferences(B, B))
    det = deterministic_solve(0.6, Preferences(B, B))
    with pytest.raises(DomainError):
        det.policy(det.omega_max_det + 0.1)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.56, 0.9), st.floats(0.9, 0.999))
def test_deterministic_descent_property(s, beta):
    det = deterministic_solve(s, Preferences(beta, beta))
    x = np.linspace(det.omega_target, det.omega_max_det, 60)
    g = det.policy(x)
    assert np.all(det.policy(g) <= g + 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.55, 0.65), st.floats(0.05, 0.14))
def test_first_best_debt_in_unit_interval(kappa, eps):
    fb = first_best(example1(kappa, eps))
    assert np.all(fb.d_star >= 0) and np.all(fb.d_star < 1)
