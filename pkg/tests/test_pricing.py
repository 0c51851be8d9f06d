import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from olgins.core import GrowthProcess
from olgins.debt import debt_system
from olgins.errors import DomainError
from olgins.ergodic import FirstBestPolicy, atom_chain
from olgins.pricing import (
    asset_prices, chain_debt_policy, debt_returns, risk_premium_growth, mrp, perron, state_prices,
)
from olgins.shooting import chi_upsilon


@pytest.fixture(scope="module")
def rep(ex1_sol, ex1_chain):
    return asset_prices(ex1_sol, ex1_chain, growth=risk_premium_growth())


@pytest.fixture(scope="module")
def rep3(three_sol, three_chain):
    return asset_prices(three_sol, three_chain)


def test_state_prices_nonnegative(rep):
    assert rep.Q.min() >= 0.0
    assert rep.rho > 0 and np.all(rep.psi > 0)


def test_sdf_at_repeated_fixed_point(ex1, ex1_sol, ex1_chain, rep):
    i = int(rep.spread_points[1])
    j = int(ex1_chain.succ[i, 1])
    m = rep.Q[i, j] / ex1.pi[1]
    assert m == pytest.approx(ex1.delta, abs=1e-8)


def test_sdf_increasing_in_next_share(ex1, ex1_chain, rep):
    m1 = np.array([rep.Q[i, ex1_chain.succ[i, 0]] for i in range(len(ex1_chain))]) / ex1.pi[0]
    m2 = np.array([rep.Q[i, ex1_chain.succ[i, 1]] for i in range(len(ex1_chain))]) / ex1.pi[1]
    assert np.all(m2 > m1)


def test_prices_fall_with_debt(ex1, ex1_sol):
    ds = debt_system(ex1_sol, 400)
    _, _, q = debt_returns(ex1, ds.d_grid, ds.b)
    assert np.all(np.diff(q, axis=0) <= 1e-15)


def test_perron_root_and_vector(ex1, ex1_chain, rep):
    assert rep.rho == pytest.approx(ex1.delta, abs=1e-6)
    f_over_nu = ex1_chain.c / (1.0 + ex1_chain.mu)
    assert np.allclose(rep.psi, f_over_nu / f_over_nu.sum(), atol=1e-6)


def test_long_yield(rep):
    assert rep.y_inf == pytest.approx(1 / 75, abs=1e-6)


def test_upsilon(ex1, ex1_chain, rep):
    ups = chi_upsilon(ex1)[1]
    assert rep.upsilon == pytest.approx(ups, abs=1e-6)
    assert rep.psi_ratio_log == pytest.approx(rep.upsilon, abs=1e-6)
    top = int(np.argmax(ex1_chain.mu))
    assert ex1_chain.state[top] == 1
    assert ex1_chain.debt[top] == pytest.approx(ex1_chain.debt[ex1_chain.state == 1].max())


def test_yields_monotone_and_bounded(rep, rep3):
    for r in (rep, rep3):
        ch = r.chain
        y = r.curves.y
        for s in range(ch.params.n_states):
            idx = np.nonzero(ch.state == s)[0]
            o = idx[np.argsort(r.d[idx])]
            assert np.all(np.diff(y[:, o], axis=1) >= -1e-9)
        k = np.arange(1, y.shape[0] + 1)[:, None]
        assert np.all(np.abs(y - r.y_inf) <= r.upsilon / k + 1e-9)


def test_spread_signs(rep, rep3):
    for r in (rep, rep3):
        assert r.spreads[0] > 0
        assert r.spreads[-1] < 0


def test_growth_shift(rep):
    shift = rep.curves.y_plus - rep.curves.y
    assert np.allclose(shift, np.log(0.98462), atol=1e-5)
    assert np.ptp(shift) < 1e-15


def test_mrp_properties(ex1, ex1_sol, rep):
    pr = rep.premium
    assert np.max(np.abs(pr.mrp_plus - pr.mrp - pr.alpha * pr.mrp_star)) < 1e-12
    assert np.all(pr.mrp < 0)
    assert np.all((pr.alpha > 0) & (pr.alpha < 1))
    assert np.all(pr.gap > 0)
    assert pr.mrp_star == pytest.approx(0.05624, abs=1e-4)


def test_gap_constant_below_critical(ex1, ex1_sol):
    ds = debt_system(ex1_sol, 500)
    pr = mrp(ex1, ds.d_grid, ds.b, risk_premium_growth())
    low = ds.d_grid <= ds.d_c
    assert np.ptp(pr.gap[low]) < 1e-9


def test_risk_neutral_identity_and_covariance(ex1, rep, ex1_sol, ex1_chain):
    d, b = chain_debt_policy(ex1_chain, ex1_sol)
    m, R, q = debt_returns(ex1, d, b)
    assert np.allclose(np.sum(q * R, axis=1), 1.0, atol=1e-13)
    pi = ex1.pi
    cov = np.sum(pi * m * R, axis=1) - np.sum(pi * m, axis=1) * np.sum(pi * R, axis=1)
    assert np.allclose(rep.premium.mrp, -cov, atol=1e-13)


def test_degenerate_growth(ex1, ex1_sol, ex1_chain):
    d, b = chain_debt_policy(ex1_chain, ex1_sol)
    pr = mrp(ex1, d, b, GrowthProcess())
    assert pr.mrp_star == 0.0
    assert np.array_equal(pr.mrp_plus, pr.mrp)


def test_first_best_oracle(ex1):
    fb = FirstBestPolicy(ex1)
    ch = atom_chain(fb)
    r = asset_prices(fb, ch, growth=risk_premium_growth())
    assert r.upsilon == 0.0
    assert r.rho == pytest.approx(ex1.delta, abs=1e-14)
    assert np.allclose(r.premium.mrp, 0.0, atol=1e-14)
    assert np.allclose(r.premium.alpha, 1.0, atol=1e-14)
    assert np.allclose(r.premium.mrp_plus, r.premium.mrp_star, atol=1e-14)
    assert np.allclose(r.curves.y, r.y_inf, atol=1e-14)


def test_zero_revenue_error(ex1):
    with pytest.raises(DomainError):
        debt_returns(ex1, [0.1], [[0.0, 0.0]])


def test_empty_support_error(ex1_sol, ex1_chain):
    import dataclasses

    empty = dataclasses.replace(ex1_chain, state=ex1_chain.state[:0], omega=ex1_chain.omega[:0],
                                succ=ex1_chain.succ[:0], c=ex1_chain.c[:0])
    with pytest.raises(DomainError):
        state_prices(empty, ex1_sol)


@settings(max_examples=40, deadline=None)
@given(arrays(float, (6, 6), elements=st.floats(0.01, 1.0)))
def test_perron_matches_dense_eigen(m):
    rho, psi = perron(sp.csr_matrix(m))
    w, v = np.linalg.eig(m)
    k = np.argmax(np.real(w))
    ref = np.abs(np.real(v[:, k]))
    assert rho == pytest.approx(np.real(w[k]), rel=1e-10)
    assert np.allclose(psi, ref / ref.sum(), atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 0.35), st.lists(st.floats(0.01, 0.37), min_size=2, max_size=2),
       st.floats(0.5, 0.99), st.floats(1.0, 1.6))
def test_decomposition_identity_property(d, b, lo, hi):
    from olgins.core import example1

    g = GrowthProcess(np.array([lo, hi]), np.array([0.5, 0.5]))
    pr = mrp(example1(), [d], [b], g)
    assert abs(pr.mrp_plus[0] - pr.mrp[0] - pr.alpha[0] * pr.mrp_star) < 1e-12
    assert pr.mrp_star >= 0.0
