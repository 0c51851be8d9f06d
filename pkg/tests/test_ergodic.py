import warnings

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from olgins.ergodic import (
    FirstBestPolicy, atom_chain, draw_states, invariant, regeneration_stats, reset_reach,
    simulate_path, stationary,
)


@pytest.fixture(scope="module")
def dist(ex1_sol):
    return invariant(ex1_sol)


def test_invariant_reset_masses(ex1_sol, dist):
    assert dist.residual < 1e-8
    assert dist.phi.sum() == pytest.approx(1.0, abs=1e-12)
    assert dist.mass_at(0, ex1_sol.omega0[0]) == pytest.approx(0.25, abs=0.01)
    assert dist.mass_at(1, ex1_sol.omega0[1]) == pytest.approx(0.25, abs=0.01)


def test_invariant_ladder_ratios(ex1_sol, dist):
    rungs = ex1_sol.ladder(5)
    m = np.array([dist.mass_at(1, w) for w in rungs])
    assert np.allclose(m[1:] / m[:-1], 0.5, atol=0.02)


def test_atoms_detected(ex1_sol, dist):
    k0 = int(dist.chain.locate(0, ex1_sol.omega0[0]))
    assert (0, k0) in dist.atoms
    assert dist.return_times[(0, k0)] == pytest.approx(4.0, abs=0.2)


def test_regeneration_condition(ex1_sol, dist):
    k, low = reset_reach(dist, ex1_sol)
    assert k is not None
    assert low >= 0.5**k - 1e-15


def test_atom_chain_example1(ex1_sol, ex1_chain):
    assert ex1_chain.truncated_mass == 0.0
    assert ex1_chain.mass.sum() == pytest.approx(1.0, abs=1e-12)
    top = np.sort(ex1_chain.mass)[::-1]
    assert np.allclose(top[:2], 0.25, atol=1e-12)
    assert np.allclose(top[2:4], 0.125, atol=1e-12)
    assert np.all(ex1_chain.omega >= ex1_sol.omega0[ex1_chain.state] - 1e-15)


def test_first_best_chain_has_state_atoms(ex1, three):
    for p in (ex1, three):
        fb = FirstBestPolicy(p)
        ch = atom_chain(fb)
        assert len(ch) == p.n_states
        assert np.allclose(np.sort(ch.mass), np.sort(p.pi), atol=1e-12)
        d = invariant(fb, bins=200)
        assert len(d.atoms) == p.n_states
        assert np.allclose(sorted(d.phi[a] for a in d.atoms), np.sort(p.pi), atol=1e-10)


def test_simulated_path_respects_constraints(ex1_sol):
    path = simulate_path(ex1_sol, T=3000, seed=7)
    assert np.all(path.young_gain >= -1e-9)
    assert np.all(path.c <= ex1_sol.params.s[path.state] + 1e-12)
    assert np.all(path.omega >= ex1_sol.omega0[path.state] - 1e-15)
    again = simulate_path(ex1_sol, T=3000, seed=7)
    assert np.array_equal(path.omega, again.omega)


def test_regeneration_stats(ex1_sol):
    path = simulate_path(ex1_sol, T=20000, seed=3)
    reg = regeneration_stats(path, (0, float(ex1_sol.omega0[0])))
    assert reg.n_blocks > 1000
    assert reg.mean_block == pytest.approx(4.0, abs=0.2)
    short = simulate_path(ex1_sol, x0=(1, float(ex1_sol.omega0[1])), states=[1, 1, 1])
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        regeneration_stats(short)
    assert any("regenerations" in str(x.message) for x in w)


def test_three_state_sample_path(three_sol):
    path = simulate_path(three_sol, T=400, seed=11)
    rep = (path.state[1:] == 2) & (path.state[:-1] == 2)
    idx = np.nonzero(rep)[0] + 1
    assert idx.size > 0
    assert np.all(path.c[idx] < path.c[idx - 1])
    reset = path.omega == three_sol.omega0[path.state]
    for s in range(3):
        c = path.c[reset & (path.state == s)]
        if c.size > 1:
            assert np.ptp(c) < 1e-10


def test_draw_states_frequencies():
    rng = np.random.default_rng(0)
    x = draw_states(rng, np.array([0.2, 0.5, 0.3]), 200_000)
    assert np.allclose(np.bincount(x) / x.size, [0.2, 0.5, 0.3], atol=5e-3)


@settings(max_examples=40, deadline=None)
@given(arrays(float, (5, 5), elements=st.floats(0.01, 1.0)))
def test_power_iteration_matches_eigenvector(m):
    P = m / m.sum(axis=1, keepdims=True)
    phi, res, _ = stationary(sp.csr_matrix(P), 1e-13)
    w, v = np.linalg.eig(P.T)
    ref = np.real(v[:, np.argmin(np.abs(w - 1.0))])
    ref /= ref.sum()
    assert np.allclose(phi, ref, atol=1e-9)
    assert res < 1e-12
