"""Sample paths, the invariant distribution and the ergodic support.

Two representations of the long-run distribution are provided:

* :func:`invariant` bins each state's promise range uniformly and iterates
  the binned transition matrix to its fixed point.
* :func:`atom_chain` follows the countable set of promises reachable from the
  regeneration point ``(1, ω⁰(1))`` exactly, merging coincident points and
  truncating at a depth or size cap. Pricing and impulse responses use it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray

from .benchmarks import first_best
from .core import autarky
from .errors import ConvergenceError
from .planner import Policy

MASS_FLOOR = 1e-12
ATOM_RATIO = 10.0


# --------------------------------------------------------------------------
# policy providers


class FirstBestPolicy:
    """Complete-insurance policies behind the same interface as a solution.

    Promises are ``ω*(r)`` whatever the current state; the young consume
    ``c*(s)``.
    """

    def __init__(self, params):
        self.params = params
        self.autarky = autarky(params)
        self.first_best = first_best(params)
        self.omega0 = self.first_best.omega_star.copy()
        self.c0 = self.first_best.c_star.copy()
        self.mu0 = np.zeros(params.n_states)

    @property
    def omega_min(self):
        return self.autarky.omega_min

    @property
    def omega_max(self):
        return self.autarky.omega_max

    def policy(self, s, omega) -> Policy:
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        s = np.broadcast_to(np.asarray(s, dtype=int), omega.shape)
        n, k = omega.size, self.params.n_states
        zeros = np.zeros((n, k))
        return Policy(c=self.c0[s].copy(), promises=np.tile(self.omega0, (n, 1)),
                      mu=np.zeros(n), lam=np.zeros(n), xi=zeros, eta=zeros.copy())

    def initial_promise(self, s0=None, target=None):
        s0 = self.params.s0 if s0 is None else s0
        return float(self.omega0[s0])


class _Memo:
    """Scalar policy lookups cached on the exact ``(s, ω)`` pair."""

    def __init__(self, sol):
        self.sol = sol
        self.cache = {}

    def __call__(self, s: int, omega: float):
        key = (int(s), float(omega))
        hit = self.cache.get(key)
        if hit is None:
            pol = self.sol.policy(s, [omega])
            hit = (float(pol.c[0]), pol.promises[0].copy(), float(pol.mu[0]))
            self.cache[key] = hit
        return hit


def draw_states(rng: np.random.Generator, probs, size) -> NDArray[np.int64]:
    """Inverse-CDF draws of state indices."""
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(size), side="right").astype(np.int64)


# --------------------------------------------------------------------------
# sample paths


@dataclass(frozen=True)
class SamplePath:
    """State, promise, young consumption and debt at ``t = 0..T-1``.

    ``young_gain`` is the young's lifetime utility over autarky; it is
    nonnegative when the participation constraint holds.
    """

    state: NDArray[np.int64]
    omega: NDArray[np.float64]
    c: NDArray[np.float64]
    d: NDArray[np.float64]
    young_gain: NDArray[np.float64]
    seed: int | None

    def __len__(self):
        return int(self.state.size)

    def rows(self):
        for t in range(len(self)):
            yield t, int(self.state[t]) + 1, self.omega[t], self.c[t], self.d[t]

    header = ("t", "state", "omega", "c", "d")


def simulate_path(sol, x0=None, T: int = 1000, seed: int | None = 0, states=None) -> SamplePath:
    """Simulate ``T`` periods from ``x0 = (s0, ω0)`` (0-based state).

    ``x0`` defaults to the initial state of the parameters and the promise
    from ``initial_promise``. ``states`` may fix the state sequence; its first
    entry must equal ``s0``.
    """
    params = sol.params
    if x0 is None:
        s0 = params.s0
        x0 = (s0, sol.initial_promise(s0))
    s, omega = int(x0[0]), float(x0[1])
    if states is None:
        rng = np.random.default_rng(seed)
        states = np.empty(T, dtype=np.int64)
        states[0] = s
        states[1:] = draw_states(rng, params.pi, T - 1)
    else:
        states = np.asarray(states, dtype=np.int64)
        T = states.size
        if states[0] != s:
            raise ValueError("first state of the sequence must equal x0's state")
    memo = _Memo(sol)
    uhat = sol.autarky.upsilon_hat
    b = params.beta
    om = np.empty(T)
    c = np.empty(T)
    gain = np.empty(T)
    for t in range(T):
        s = int(states[t])
        # a promise below ω⁰(s) is delivered as ω⁰(s)
        omega = max(omega, float(sol.omega0[s]))
        ct, prom, _ = memo(s, omega)
        om[t], c[t] = omega, ct
        gain[t] = np.log(ct) + b * float(np.sum(params.pi * prom)) - uhat[s]
        if t + 1 < T:
            omega = float(prom[states[t + 1]])
    d = (np.expm1(om) + params.s[states]) / params.s[states]
    return SamplePath(state=states, omega=om, c=c, d=d, young_gain=gain, seed=seed)


@dataclass(frozen=True)
class RegenerationStats:
    times: NDArray[np.int64]
    mean_block: float
    n_blocks: int


def regeneration_stats(path: SamplePath, x0=None, tol: float = 1e-12) -> RegenerationStats:
    """Visits to the regeneration point and the mean time between them.

    ``x0 = (s, ω)`` defaults to the first point of the path. Warns when
    fewer than two visits are observed.
    """
    if x0 is None:
        x0 = (int(path.state[0]), float(path.omega[0]))
    hit = (path.state == x0[0]) & (np.abs(path.omega - x0[1]) <= tol)
    times = np.nonzero(hit)[0]
    if times.size < 2:
        warnings.warn("fewer than two regenerations observed; horizon too short", RuntimeWarning,
                      stacklevel=2)
        return RegenerationStats(times=times, mean_block=float("nan"), n_blocks=0)
    gaps = np.diff(times)
    return RegenerationStats(times=times, mean_block=float(gaps.mean()), n_blocks=int(gaps.size))


# --------------------------------------------------------------------------
# binned invariant distribution


@dataclass(frozen=True)
class BinnedChain:
    """Uniform promise bins per state and the sparse transition matrix.

    Flat index of ``(s, k)`` is ``s * n_bins + k``.
    """

    edges: NDArray[np.float64]
    centers: NDArray[np.float64]
    P: sp.csr_matrix

    @property
    def n_bins(self) -> int:
        return int(self.centers.shape[1])

    def locate(self, s, omega):
        """Bin index of ``ω`` in state ``s``."""
        e = self.edges[s]
        k = np.searchsorted(e, omega, side="right") - 1
        return np.clip(k, 0, self.n_bins - 1)


def binned_chain(sol, bins: int = 1000) -> BinnedChain:
    """Transition matrix with ``π(r)`` mass from each bin center to the bin
    where ``g_r`` lands."""
    params = sol.params
    I = params.n_states
    edges = np.stack([np.linspace(sol.omega_min[s], sol.omega_max[s], bins + 1) for s in range(I)])
    centers = 0.5 * (edges[:, 1:] + edges[:, :-1])
    rows, cols, vals = [], [], []
    for s in range(I):
        omega = np.maximum(centers[s], sol.omega0[s])
        prom = sol.policy(s, omega).promises
        src = s * bins + np.arange(bins)
        for r in range(I):
            k = np.searchsorted(edges[r], prom[:, r], side="right") - 1
            k = np.clip(k, 0, bins - 1)
            rows.append(src)
            cols.append(r * bins + k)
            vals.append(np.full(bins, params.pi[r]))
    P = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(I * bins, I * bins))
    P.sum_duplicates()
    return BinnedChain(edges=edges, centers=centers, P=P)


@dataclass(frozen=True)
class ErgodicDistribution:
    """Invariant masses on the binned chain.

    Attributes
    ----------
    phi : ndarray, shape (I, n_bins)
    support : ndarray of bool
        Bins with mass above ``MASS_FLOOR``.
    atoms : list of (state, bin)
        Bins whose mass exceeds ``ATOM_RATIO`` times both neighbours.
    return_times : dict
        ``1/φ`` for each atom.
    residual : float
        Sup norm of ``φP − φ`` at the returned ``φ``.
    """

    chain: BinnedChain
    phi: NDArray[np.float64]
    support: NDArray[np.bool_]
    atoms: list
    return_times: dict
    residual: float
    iterations: int

    def mass_at(self, s: int, omega: float) -> float:
        return float(self.phi[s, self.chain.locate(s, omega)])

    def rows(self):
        I, N = self.phi.shape
        for s in range(I):
            for k in range(N):
                yield s + 1, self.chain.centers[s, k], self.phi[s, k]

    header = ("state", "bin_center", "mass")


def _atoms(phi):
    out = []
    for s in range(phi.shape[0]):
        m = phi[s]
        left = np.concatenate([[0.0], m[:-1]])
        right = np.concatenate([m[1:], [0.0]])
        spike = (m > MASS_FLOOR) & (m > ATOM_RATIO * left) & (m > ATOM_RATIO * right)
        out.extend((s, int(k)) for k in np.nonzero(spike)[0])
    return out


def stationary(P, tol: float, max_iter: int = 100_000, x0=None):
    """Power iteration ``φ ← φP`` from ``x0`` (uniform by default).

    Returns ``(φ, residual, iterations)``.
    """
    n = P.shape[0]
    phi = np.full(n, 1.0 / n) if x0 is None else np.asarray(x0, dtype=float) / np.sum(x0)
    PT = P.T.tocsr()
    for k in range(1, max_iter + 1):
        nxt = PT @ phi
        nxt /= nxt.sum()
        res = float(np.max(np.abs(nxt - phi)))
        phi = nxt
        if res < tol:
            return phi, float(np.max(np.abs(PT @ phi - phi))), k
    raise ConvergenceError(f"power iteration did not reach {tol:g}", [res])


def invariant(sol, bins: int = 1000, tol: float = 1e-8, x0=None) -> ErgodicDistribution:
    """Invariant distribution of the binned chain by power iteration."""
    chain = binned_chain(sol, bins)
    I = sol.params.n_states
    phi, res, k = stationary(chain.P, tol, x0=x0)
    phi = phi.reshape(I, bins)
    atoms = _atoms(phi)
    return ErgodicDistribution(
        chain=chain, phi=phi, support=phi > MASS_FLOOR, atoms=atoms,
        return_times={a: 1.0 / phi[a] for a in atoms}, residual=res, iterations=k,
    )


def reset_reach(dist: ErgodicDistribution, sol, k_max: int = 50):
    """Smallest ``k`` such that from every occupied bin the chain reaches the
    regeneration bin in ``k`` steps with probability at least ``π(1)^k``.

    Returns ``(k, min_prob)``; ``k`` is None if no such ``k ≤ k_max``.
    """
    chain = dist.chain
    target = chain.locate(0, sol.omega0[0])
    occupied = np.nonzero(dist.support.ravel())[0]
    v = np.zeros(chain.P.shape[0])
    v[target] = 1.0
    pi1 = sol.params.pi[0]
    for k in range(1, k_max + 1):
        v = chain.P @ v
        low = float(np.min(v[occupied]))
        if low >= pi1**k - 1e-15:
            return k, low
    return None, low


# --------------------------------------------------------------------------
# exact atoms


@dataclass(frozen=True)
class AtomChain:
    """Reachable ``(s, ω)`` points and their transitions.

    Attributes
    ----------
    state, omega : ndarray
        Atom coordinates (0-based state).
    succ : ndarray, shape (n, I)
        Index of the atom reached after drawing ``r``.
    exact : ndarray of bool, shape (n, I)
        False where the successor was redirected to the nearest atom of the
        same state because the enumeration was truncated there.
    c, mu : ndarray
        Young consumption and constraint multiplier at each atom.
    mass : ndarray
        Stationary distribution of the truncated chain.
    """

    params: object
    state: NDArray[np.int64]
    omega: NDArray[np.float64]
    depth: NDArray[np.int64]
    succ: NDArray[np.int64]
    exact: NDArray[np.bool_]
    c: NDArray[np.float64]
    mu: NDArray[np.float64]
    mass: NDArray[np.float64]

    def __len__(self):
        return int(self.state.size)

    @property
    def debt(self) -> NDArray[np.float64]:
        s = self.params.s[self.state]
        return (np.expm1(self.omega) + s) / s

    @property
    def transition(self) -> sp.csr_matrix:
        n, I = self.succ.shape
        rows = np.repeat(np.arange(n), I)
        vals = np.tile(self.params.pi, n)
        P = sp.csr_matrix((vals, (rows, self.succ.ravel())), shape=(n, n))
        P.sum_duplicates()
        return P

    @property
    def truncated_mass(self) -> float:
        """Stationary mass flowing through redirected transitions."""
        lost = (~self.exact) * self.params.pi[None, :]
        return float(np.sum(self.mass * lost.sum(axis=1)))


def _lookup(index, omega, r, w, tol):
    base = round(w / tol)
    for b in (base, base - 1, base + 1):
        k = index.get((r, b))
        if k is not None and abs(omega[k] - w) <= tol:
            return k
    return None


def atom_chain(sol, max_depth: int = 60, max_atoms: int = 4000, merge_tol: float = 1e-11,
               start=None) -> AtomChain:
    """Enumerate atoms reachable from ``start`` (default ``(1, ω⁰(1))``).

    Points in the same state within ``merge_tol`` are identified. Atoms at
    ``max_depth``, or found once ``max_atoms`` is reached, are not expanded;
    their transitions to unseen points go to the nearest atom in the target
    state.
    """
    params = sol.params
    I = params.n_states
    if start is None:
        start = (0, float(sol.omega0[0]))
    state, omega, depth = [int(start[0])], [float(start[1])], [0]
    index = {}

    def key(s, w):
        return (s, round(w / merge_tol))

    index[key(*start)] = 0
    succ = [None]
    c, mu = [None], [None]
    frontier = [0]
    while frontier:
        fr = np.array(frontier)
        st = np.array([state[i] for i in fr])
        om = np.array([omega[i] for i in fr])
        pol = sol.policy(st, np.maximum(om, sol.omega0[st]))
        nxt_frontier = []
        for j, i in enumerate(fr):
            c[i], mu[i] = float(pol.c[j]), float(pol.mu[j])
            row = []
            for r in range(I):
                w = float(pol.promises[j, r])
                k = _lookup(index, omega, r, w, merge_tol)
                if k is None and depth[i] < max_depth and len(state) < max_atoms:
                    k = len(state)
                    state.append(r)
                    omega.append(w)
                    depth.append(depth[i] + 1)
                    succ.append(None)
                    c.append(None)
                    mu.append(None)
                    index[key(r, w)] = k
                    nxt_frontier.append(k)
                row.append(("redirect", r, w) if k is None else k)
            succ[i] = row
        frontier = nxt_frontier
    state = np.array(state, dtype=np.int64)
    omega = np.array(omega)
    n = state.size
    S = np.empty((n, I), dtype=np.int64)
    exact = np.ones((n, I), dtype=bool)
    for i in range(n):
        for r, k in enumerate(succ[i]):
            if isinstance(k, tuple):
                cand = np.nonzero(state == r)[0]
                if cand.size == 0:
                    raise ConvergenceError("truncated support has no atom in a reachable state")
                S[i, r] = cand[np.argmin(np.abs(omega[cand] - k[2]))]
                exact[i, r] = False
            else:
                S[i, r] = k
    chain = AtomChain(params=params, state=state, omega=omega, depth=np.array(depth),
                      succ=S, exact=exact, c=np.array(c), mu=np.array(mu), mass=np.zeros(n))
    mass, _, _ = stationary(chain.transition, 1e-15, x0=np.eye(1, n, 0).ravel() + 1e-300)
    return AtomChain(params=params, state=state, omega=omega, depth=chain.depth, succ=S,
                     exact=exact, c=chain.c, mu=chain.mu, mass=mass)
