"""State prices, yield curves and the market risk premium on the ergodic support.

Prices are quoted per unit of aggregate endowment. With current state
``x = (s, d)`` and next state ``x' = (r, b_r(d))`` the stochastic discount
factor is ``m(x, x') = β s (1-d) / (1 - r (1 - b_r(d)))`` and the state price
is ``q(x, x') = π(r) m(x, x')``. Growth shocks enter only through the
harmonic mean ``γ̄`` and the arithmetic mean ``E γ``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray

from .core import GrowthProcess
from .errors import ConvergenceError, DomainError, NumericalError

PERRON_TOL = 1e-12


def _effective_omega(chain, sol):
    return np.maximum(chain.omega, sol.omega0[chain.state])


def state_prices(chain, sol) -> sp.csr_matrix:
    """State-price matrix ``Q`` on the atoms of ``chain``.

    ``m = β c(x) / e^{ω(x')}``, which equals the debt form above.
    """
    n = len(chain)
    if n == 0:
        raise DomainError("empty support")
    params = chain.params
    om = _effective_omega(chain, sol)
    I = params.n_states
    rows = np.repeat(np.arange(n), I)
    cols = chain.succ.ravel()
    m = params.beta * np.repeat(chain.c, I) / np.exp(om[cols])
    Q = sp.csr_matrix((np.tile(params.pi, n) * m, (rows, cols)), shape=(n, n))
    Q.sum_duplicates()
    return Q


def perron(Q, tol: float = PERRON_TOL, max_iter: int = 1_000_000):
    """Perron root and right eigenvector of ``Q`` by power iteration.

    ``ψ`` is normalised to sum to one. Stops when the root estimate moves
    by less than ``tol``.

    Raises
    ------
    ConvergenceError
        If the estimate stagnates; the last drift is attached as history.
    """
    n = Q.shape[0]
    psi = np.full(n, 1.0 / n)
    rho = 0.0
    drift = []
    for _ in range(max_iter):
        nxt = Q @ psi
        tot = nxt.sum()
        if not np.isfinite(tot) or tot <= 0.0:
            raise NumericalError("state-price matrix is not positive on the support")
        new_rho = tot / psi.sum()
        psi = nxt / tot
        drift.append(abs(new_rho - rho))
        rho = new_rho
        if drift[-1] < tol and float(np.max(np.abs(Q @ psi - rho * psi))) < tol:
            return float(rho), psi
    raise ConvergenceError("power iteration for the Perron root stagnated", drift[-10:])


@dataclass(frozen=True)
class YieldCurves:
    """Bond prices ``p[k-1, x]`` and yields for maturities ``k = 1..k_max``."""

    p: NDArray[np.float64]
    y: NDArray[np.float64]
    y_inf: float
    growth_shift: float

    @property
    def y_plus(self):
        return self.y + self.growth_shift

    @property
    def y_inf_plus(self):
        return self.y_inf + self.growth_shift


def yields(Q, k_max: int, rho: float, growth: GrowthProcess | None = None) -> YieldCurves:
    """``p^k = Q^k 1``, ``y^k = -log(p^k)/k`` and ``y^∞ = -log ρ``.

    With growth every yield shifts by ``log γ̄``.
    """
    n = Q.shape[0]
    p = np.empty((k_max, n))
    v = np.ones(n)
    for k in range(k_max):
        v = Q @ v
        p[k] = v
    ks = np.arange(1, k_max + 1)[:, None]
    shift = 0.0 if growth is None else float(np.log(growth.harmonic_mean))
    return YieldCurves(p=p, y=-np.log(p) / ks, y_inf=float(-np.log(rho)), growth_shift=shift)


def martin_ross(chain) -> float:
    """``Υ = log ν_max`` with ``ν = 1 + μ`` over the support."""
    return float(np.log1p(np.max(chain.mu)))


@dataclass(frozen=True)
class RiskPremium:
    """Risk premia at debt levels ``d``.

    ``mrp_plus = mrp + alpha * mrp_star`` holds identically.
    """

    d: NDArray[np.float64]
    mrp_plus: NDArray[np.float64]
    mrp: NDArray[np.float64]
    alpha: NDArray[np.float64]
    mrp_star: float
    Rf: NDArray[np.float64]
    R_bar: NDArray[np.float64]

    @property
    def gap(self):
        """``MRP* - MRP₊``."""
        return self.mrp_star - self.mrp_plus

    def rows(self):
        for k in range(self.d.size):
            yield self.d[k], self.mrp_plus[k], self.mrp[k], self.alpha[k], self.mrp_star

    header = ("d", "mrp_plus", "mrp", "alpha", "mrp_star")


def debt_returns(params, d, b):
    """SDF ``m``, return ``R`` on public debt and state prices, shape ``(n, I)``.

    ``b`` has shape ``(n, I)``; the current share is taken as one since
    neither ``R`` nor ``α`` depends on it.
    """
    s, pi = params.s, params.pi
    d = np.atleast_1d(np.asarray(d, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    m = params.beta * (1.0 - d)[:, None] / (1.0 - s * (1.0 - b))
    payoff = s * b
    price = np.sum(pi * m * payoff, axis=1)
    if np.any(price <= 0.0):
        raise DomainError("bond revenue is zero; the return on debt is undefined")
    R = payoff / price[:, None]
    return m, R, pi * m


def mrp(params, d, b, growth: GrowthProcess | None = None) -> RiskPremium:
    """Risk-premium decomposition at debt ``d`` with next-period debt ``b``.

    ``MRP = R̄/R^f - 1``, ``α = R̄/R^f``, ``MRP* = (Eγ - γ̄)/γ̄`` and
    ``MRP₊ = α Eγ/γ̄ - 1``.
    """
    growth = params.growth if growth is None else growth
    m, R, q = debt_returns(params, d, b)
    Rf = 1.0 / q.sum(axis=1)
    R_bar = np.sum(params.pi * R, axis=1)
    alpha = R_bar / Rf
    gbar, Eg = growth.harmonic_mean, growth.mean
    mrp_star = (Eg - gbar) / gbar
    return RiskPremium(
        d=np.atleast_1d(np.asarray(d, dtype=float)), mrp_plus=alpha * Eg / gbar - 1.0,
        mrp=alpha - 1.0, alpha=alpha, mrp_star=float(mrp_star), Rf=Rf, R_bar=R_bar,
    )


def chain_debt_policy(chain, sol):
    """Debt ``d`` at each atom and ``b_r`` at its successors."""
    s = chain.params.s
    om = _effective_omega(chain, sol)
    d = (np.expm1(om) + s[chain.state]) / s[chain.state]
    return d, d[chain.succ]


def risk_premium_growth() -> GrowthProcess:
    """Two-point growth with arithmetic mean 1.04 used for the risk-premium table."""
    return GrowthProcess(np.array([0.8, 1.28]), np.array([0.5, 0.5]))


@dataclass(frozen=True)
class AssetPriceReport:
    """Prices on an atom chain; ``x`` indexes ``chain`` atoms."""

    chain: object
    Q: sp.csr_matrix
    rho: float
    psi: NDArray[np.float64]
    curves: YieldCurves
    upsilon: float
    spreads: NDArray[np.float64]
    spread_points: NDArray[np.int64]
    premium: RiskPremium

    @property
    def d(self):
        return self.premium.d

    @property
    def y_inf(self):
        return self.curves.y_inf

    @property
    def psi_ratio_log(self) -> float:
        return float(np.log(self.psi.max() / self.psi.min()))

    def yield_rows(self):
        ch = self.chain
        K = self.curves.y.shape[0]
        order = np.lexsort((self.d, ch.state))
        for i in order:
            for k in range(K):
                yield (int(ch.state[i]) + 1, self.d[i], k + 1, self.curves.y[k, i],
                       self.curves.y_plus[k, i])

    yield_header = ("state", "d", "k", "y", "y_plus")


def spread_points(chain, sol, d_star, d_max) -> NDArray[np.int64]:
    """Atom nearest ``(s, d*(s))`` per state, with ``d*`` clipped into the
    state's support."""
    d, _ = chain_debt_policy(chain, sol)
    out = np.empty(chain.params.n_states, dtype=np.int64)
    for s in range(out.size):
        idx = np.nonzero(chain.state == s)[0]
        target = np.clip(min(d_star[s], d_max), d[idx].min(), d[idx].max())
        out[s] = idx[np.argmin(np.abs(d[idx] - target))]
    return out


def asset_prices(sol, chain=None, k_max: int = 10, growth: GrowthProcess | None = None,
                 d_max: float | None = None) -> AssetPriceReport:
    """Full pricing report on the exact support of ``sol``."""
    from .debt import debt_limit
    from .ergodic import atom_chain

    chain = atom_chain(sol) if chain is None else chain
    params = chain.params
    Q = state_prices(chain, sol)
    rho, psi = perron(Q)
    curves = yields(Q, k_max, rho, params.growth if growth is None else growth)
    d, b = chain_debt_policy(chain, sol)
    prem = mrp(params, d, b, growth)
    d_max = debt_limit(params) if d_max is None else d_max
    pts = spread_points(chain, sol, sol.first_best.d_star, d_max)
    return AssetPriceReport(
        chain=chain, Q=Q, rho=rho, psi=psi, curves=curves, upsilon=martin_ross(chain),
        spreads=curves.y_inf - curves.y[0, pts], spread_points=pts, premium=prem,
    )
