"""Welfare measures and responses to a one-period population shock.

A shock of size ``ε`` enlarges the cohort born in the shock period by the
factor ``1 + ε``. With ``y`` the young's baseline share, aggregate income
becomes ``e = 1 + ε y`` and the young's share becomes ``(1+ε) y / e``. The
shock-period planner weights the young and the continuation by ``1 + ε``;
from the following period on the baseline policies apply.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DomainError, InvalidParameters

ENUMERATION_MAX_T = 12
DEFAULT_HORIZON = 25


# --------------------------------------------------------------------------
# welfare


@dataclass(frozen=True)
class InsuranceReport:
    """``1 - ι = cov(log c', log r)/var(log r)`` under ``π``."""

    iota: NDArray[np.float64]
    cov: NDArray[np.float64]
    var: float


def insurance_coefficient(sol, s, omega) -> InsuranceReport:
    """Insurance coefficient at states ``(s, ω)`` from next-period policies."""
    params = sol.params
    pi = params.pi
    logr = np.log(params.s)
    var = float(np.sum(pi * (logr - np.sum(pi * logr)) ** 2))
    if params.n_states < 2 or var <= 0.0:
        raise DomainError("no endowment risk; the insurance coefficient is undefined")
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    s = np.broadcast_to(np.asarray(s, dtype=int), omega.shape)
    prom = sol.policy(s, np.maximum(omega, sol.omega0[s])).promises
    logc = np.empty_like(prom)
    for r in range(params.n_states):
        w = np.maximum(prom[:, r], sol.omega0[r])
        logc[:, r] = np.log(sol.policy(r, w).c)
    dev = logc - np.sum(pi * logc, axis=1, keepdims=True)
    cov = np.sum(pi * dev * (logr - np.sum(pi * logr)), axis=1)
    return InsuranceReport(iota=1.0 - cov / var, cov=cov, var=var)


def cev_from_value(fb, s, value):
    """``θ`` such that scaling first-best consumption by ``1-θ`` yields ``value``."""
    b, d = fb.beta, fb.delta
    scale = (1.0 + b / d) / (1.0 - d)
    base = fb.v_star[np.asarray(s)] + d * fb.V_bar_star
    return -np.expm1((np.asarray(value, dtype=float) - base) / scale)


def cev_residual(fb, s, value, theta):
    """Residual of the defining equation at ``θ``."""
    b, d = fb.beta, fb.delta
    lt = np.log1p(-np.asarray(theta, dtype=float))
    cs = fb.c_star
    now = np.log(cs[s]) + lt + (b / d) * (np.log1p(-cs[s]) + lt)
    later = np.sum(fb.probs * (np.log(cs) + (b / d) * np.log1p(-cs))) + (1.0 + b / d) * lt
    return now + d / (1.0 - d) * later - value


def cev(sol, s, omega):
    """Consumption-equivalent welfare loss ``θ(s, ω)`` relative to first best."""
    omega = np.asarray(omega, dtype=float)
    return cev_from_value(sol.first_best, s, sol.value(s, omega))


@dataclass(frozen=True)
class WelfareMeasures:
    """``ι`` and ``θ`` on the atoms of an ergodic chain and their means."""

    iota: NDArray[np.float64]
    theta: NDArray[np.float64]
    mass: NDArray[np.float64]

    @property
    def mean_iota(self) -> float:
        return float(np.sum(self.mass * self.iota))

    @property
    def mean_theta(self) -> float:
        return float(np.sum(self.mass * self.theta))


def welfare_measures(sol, chain=None) -> WelfareMeasures:
    """Evaluate ``ι`` and ``θ`` at every atom, weighted by the invariant mass."""
    from .ergodic import atom_chain

    chain = atom_chain(sol) if chain is None else chain
    om = np.maximum(chain.omega, sol.omega0[chain.state])
    iota = insurance_coefficient(sol, chain.state, om).iota
    theta = np.empty(len(chain))
    for s in range(sol.params.n_states):
        k = chain.state == s
        theta[k] = cev(sol, s, om[k])
    return WelfareMeasures(iota=iota, theta=theta, mass=chain.mass)


# --------------------------------------------------------------------------
# population shock


def first_best_shock_share(params, eps: float) -> float:
    """First-best young share in the shock period, ``δ(1+ε)/(β+δ(1+ε))``."""
    _check_eps(eps)
    w = params.delta * (1.0 + eps)
    return float(w / (params.beta + w))


def _check_eps(eps):
    if not np.isfinite(eps) or eps <= -1.0:
        raise InvalidParameters("population shock must exceed -1")


@dataclass(frozen=True)
class ShockPolicy:
    """Shock-period policies at ``(s, ω)`` with ``ω = g_s(x_T)``."""

    c: NDArray[np.float64]
    promises: NDArray[np.float64]
    mu: NDArray[np.float64]


def shock_policy(sol, eps: float, s, omega, iters: int = 80) -> ShockPolicy:
    """Solve the shock-period problem at a batch of states.

    The young's constraint ``log c + β Σ π ω_r ≥ log s̃ + β Σ π log(1-r)`` is
    met at the smallest multiplier ``μ``; promises satisfy
    ``λ_r(ω_r) = μ/(1+ε)`` and the unconstrained share is
    ``δ(1+ε+μ)/(δ(1+ε+μ)+β)``, capped by the old's promise.
    """
    _check_eps(eps)
    params = sol.params
    b, d, pi = params.beta, params.delta, params.pi
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    s = np.broadcast_to(np.asarray(s, dtype=int), omega.shape)
    y = params.s[s]
    e = 1.0 + eps * y
    s_tilde = (1.0 + eps) * y / e
    cap = -np.expm1(omega - np.log(e))
    need = np.log(s_tilde) + b * np.sum(pi * np.log1p(-params.s))
    tabs = sol.tables

    def evaluate(u):
        mu = np.expm1(u)
        t = np.log1p(mu / (1.0 + eps))
        prom = np.stack([tab.promise(t) for tab in tabs], axis=-1)
        w = d * (1.0 + eps + mu)
        c = np.minimum(w / (w + b), cap)
        return c, prom, np.log(c) + b * (prom @ pi) - need

    u_hi = np.log1p(sol.config.lam_cap) + np.log1p(eps) if eps > 0 else np.log1p(sol.config.lam_cap)
    lo = np.zeros(omega.size)
    hi = np.full(omega.size, u_hi)
    _, _, g0 = evaluate(lo)
    todo = g0 < 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ok = evaluate(mid)[2] >= 0.0
        hi = np.where(todo & ok, mid, hi)
        lo = np.where(todo & ~ok, mid, lo)
    u = np.where(todo, hi, 0.0)
    c, prom, _ = evaluate(u)
    return ShockPolicy(c=c, promises=prom, mu=np.expm1(u))


@dataclass(frozen=True)
class ShockResponse:
    """Mean young share ``c̄`` at ``t = 0..horizon`` (``t = 1`` is the shock
    period) with and without the shock.

    ``delta_star`` is ``(c̄ - c*_t)/c*_t``; ``se`` holds Monte Carlo standard
    errors (zero where the expectation is exact); ``min_gain`` is the
    smallest pathwise difference between shocked and baseline shares.
    """

    epsilon: float
    c_bar: NDArray[np.float64]
    c_base: NDArray[np.float64]
    c_star: NDArray[np.float64]
    se: NDArray[np.float64]
    exact: NDArray[np.bool_]
    min_gain: NDArray[np.float64]

    @property
    def delta_star(self):
        return (self.c_bar - self.c_star) / self.c_star

    @property
    def horizon(self) -> int:
        return int(self.c_bar.size - 1)

    @property
    def violations(self) -> int:
        return int(np.sum(self.min_gain[1:] < -1e-12))

    def rows(self):
        for t in range(self.c_bar.size):
            yield t, self.delta_star[t]

    header = ("t", "delta_star_c")


def _c_star_path(sol, eps, horizon):
    fb = sol.first_best
    long_run = float(np.sum(sol.params.pi * fb.c_star))
    out = np.full(horizon + 1, long_run)
    out[1] = first_best_shock_share(sol.params, eps)
    return out


def _step(sol, s, omega):
    pol = sol.policy(s, np.maximum(omega, sol.omega0[s]))
    return pol.c, pol.promises


def _unique_eval(fn, s, omega):
    """Evaluate ``fn`` once per distinct ``(s, ω)``."""
    key = np.stack([s.astype(float), omega], axis=1)
    uk, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.ravel()
    c, prom = fn(uk[:, 0].astype(int), uk[:, 1])
    return c[inv], prom[inv]


def _shock_step(sol, eps):
    def fn(s, omega):
        pol = shock_policy(sol, eps, s, omega)
        return pol.c, pol.promises
    return fn


def demographic_irf(sol, eps: float, horizon: int = DEFAULT_HORIZON, chain=None,
                    mode: str = "analytic", n_paths: int = 20_000, seed: int = 0,
                    enum_max_t: int = ENUMERATION_MAX_T,
                    max_points: int = 250_000) -> ShockResponse:
    """Impulse response of the young's share to a one-period population shock.

    ``x_T`` is drawn from the invariant distribution on the exact support.
    In ``analytic`` mode horizons up to ``enum_max_t`` are exact expectations
    over all state paths, computed by propagating weights and merging
    identical ``(state, ω)`` pairs; later horizons, and any horizon whose
    merged point set would exceed ``max_points``, use Monte Carlo. In
    ``monte-carlo`` mode every horizon is simulated.
    """
    from .ergodic import atom_chain, draw_states

    _check_eps(eps)
    if horizon < 1:
        raise InvalidParameters("horizon must be at least 1")
    if mode not in ("analytic", "monte-carlo"):
        raise InvalidParameters(f"unknown IRF mode {mode!r}")
    chain = atom_chain(sol) if chain is None else chain
    c_star = _c_star_path(sol, eps, horizon)
    H = horizon + 1
    c_bar, c_base, se = np.zeros(H), np.zeros(H), np.zeros(H)
    exact = np.zeros(H, dtype=bool)
    min_gain = np.zeros(H)
    keep = chain.mass > 0.0
    c_bar[0] = c_base[0] = float(np.sum(chain.mass * chain.c))
    exact[0] = True
    n_exact = 0
    if mode == "analytic":
        n_exact = _enumerate(sol, eps, chain, keep, min(enum_max_t, horizon), max_points,
                             c_bar, c_base, min_gain)
        exact[1:n_exact + 1] = True
    if n_exact < horizon:
        rng = np.random.default_rng(seed)
        mc = _simulate(sol, eps, chain, horizon, n_paths, rng, draw_states)
        lo = n_exact + 1
        c_bar[lo:] = mc[0][lo:]
        c_base[lo:] = mc[1][lo:]
        se[lo:] = mc[2][lo:]
        min_gain[lo:] = mc[3][lo:]
    return ShockResponse(epsilon=float(eps), c_bar=c_bar, c_base=c_base, c_star=c_star, se=se,
                         exact=exact, min_gain=min_gain)


def _enumerate(sol, eps, chain, keep, T, max_points, c_bar, c_base, min_gain):
    """Exact means for ``t = 1..T``; returns the last horizon reached."""
    I = sol.params.n_states
    pi = sol.params.pi
    idx = np.nonzero(keep)[0]
    om = np.maximum(chain.omega[idx], sol.omega0[chain.state[idx]])
    prom = sol.policy(chain.state[idx], om).promises
    w = np.repeat(chain.mass[idx], I) * np.tile(pi, idx.size)
    s = np.tile(np.arange(I), idx.size)
    g = prom.ravel()
    ct, pt = _unique_eval(_shock_step(sol, eps), s, g)
    cb, pb = _unique_eval(lambda a, b: _step(sol, a, b), s, g)
    for t in range(1, T + 1):
        if t > 1:
            ct, pt = _unique_eval(lambda a, b: _step(sol, a, b), s, wt)
            cb, pb = _unique_eval(lambda a, b: _step(sol, a, b), s, wb)
        c_bar[t] = float(np.sum(w * ct))
        c_base[t] = float(np.sum(w * cb))
        min_gain[t] = float(np.min(ct - cb))
        if t == T or s.size * I > max_points:
            return t
        # expand by next state, then merge coincident points
        n = s.size
        w = np.repeat(w, I) * np.tile(pi, n)
        wt = pt.ravel()
        wb = pb.ravel()
        s = np.tile(np.arange(I), n)
        key = np.stack([s.astype(float), wt, wb], axis=1)
        uk, inv = np.unique(key, axis=0, return_inverse=True)
        inv = inv.ravel()
        w = np.bincount(inv, weights=w, minlength=uk.shape[0])
        s, wt, wb = uk[:, 0].astype(int), uk[:, 1], uk[:, 2]


def _simulate(sol, eps, chain, horizon, n_paths, rng, draw_states):
    """Sequential importance sampling of the shocked-minus-baseline share.

    Each step takes the exact expectation over the next state. The path then
    moves to a successor whose shocked and baseline points still differ,
    drawn with probability proportional to ``π``, and its weight is scaled
    by the total probability of those successors. Merged successors
    contribute zero from then on, so the estimator stays unbiased while
    every path keeps contributing.
    """
    H = horizon + 1
    I = sol.params.n_states
    pi = sol.params.pi
    base = float(np.sum(chain.mass * chain.c))
    x = draw_states(rng, chain.mass, n_paths)
    om = np.maximum(chain.omega[x], sol.omega0[chain.state[x]])
    g_t = sol.policy(chain.state[x], om).promises
    g_b = g_t.copy()
    w = np.ones(n_paths)
    mean_t, mean_b, se, gain = np.zeros(H), np.zeros(H), np.zeros(H), np.zeros(H)
    s = np.tile(np.arange(I), n_paths)
    rows = np.arange(n_paths)
    step = _shock_step(sol, eps)
    for t in range(1, H):
        ct, pt = _unique_eval(step, s, g_t.ravel())
        cb, pb = _unique_eval(lambda a, b: _step(sol, a, b), s, g_b.ravel())
        step = lambda a, b: _step(sol, a, b)
        diff = (ct - cb).reshape(n_paths, I)
        contrib = w * (diff @ pi)
        mean_b[t] = base
        mean_t[t] = base + float(np.mean(contrib))
        se[t] = float(np.std(contrib, ddof=1) / np.sqrt(n_paths))
        gain[t] = float(np.min(diff))
        pt = pt.reshape(n_paths, I, I)
        pb = pb.reshape(n_paths, I, I)
        cum = np.cumsum(pi * np.any(pt != pb, axis=2), axis=1)
        u = rng.random(n_paths) * cum[:, -1]
        r = np.minimum(np.sum(cum <= u[:, None], axis=1), I - 1)
        w = w * cum[:, -1]
        g_t, g_b = pt[rows, r], pb[rows, r]
    return mean_t, mean_b, se, gain


def first_best_irf(params, eps: float, horizon: int = DEFAULT_HORIZON) -> NDArray[np.float64]:
    """Mean young share under complete insurance at ``t = 0..horizon``."""
    from .benchmarks import first_best

    if horizon < 1:
        raise InvalidParameters("horizon must be at least 1")
    fb = first_best(params)
    out = np.full(horizon + 1, float(np.sum(params.pi * fb.c_star)))
    out[1] = first_best_shock_share(params, eps)
    return out
