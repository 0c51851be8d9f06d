"""Debt representation of the optimal allocation.

Debt is measured relative to the endowment of the young: with share ``s``
and old-age log share ``ω`` the debt is ``d = (e^ω - 1 + s)/s``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import brentq

from .core import EconomyParams
from .errors import DomainError

N_DEBT_GRID = 2000
_EDGE = 1e-12


def to_debt(s, omega, omega_max=None):
    """Debt ``(e^ω - 1 + s)/s`` implied by share ``s`` and promise ``ω``.

    Raises
    ------
    DomainError
        If ``ω < log(1-s)``, ``ω >= 0`` or ``ω > omega_max`` when given.
    """
    s = np.asarray(s, dtype=float)
    omega = np.asarray(omega, dtype=float)
    lo = np.log1p(-s)
    bad = (omega < lo - _EDGE) | (omega >= 0.0)
    if omega_max is not None:
        bad |= omega > np.asarray(omega_max, dtype=float) + _EDGE
    if np.any(bad):
        raise DomainError("promise outside the admissible range for this share")
    return (np.expm1(omega) + s) / s


def to_promise(s, d):
    """Inverse of :func:`to_debt`: ``ω = log(1 - s + s d)``."""
    s = np.asarray(s, dtype=float)
    d = np.asarray(d, dtype=float)
    if np.any(d < -_EDGE) or np.any(d >= 1.0):
        raise DomainError("debt must lie in [0, 1)")
    return np.log1p(s * (d - 1.0))


def _dmax_residual(d, params):
    s, pi = params.s, params.pi
    return np.log1p(-d) + params.beta * np.sum(pi * (np.log1p(s * (d - 1.0)) - np.log1p(-s)))


def debt_limit(params: EconomyParams) -> float:
    """Largest sustainable debt ``d_max`` (the nontrivial root)."""
    f = lambda d: _dmax_residual(d, params)
    # zero is always a root; the residual rises from it then falls to -∞
    lo = 1e-9
    hi = 1.0 - 1e-9
    grid = np.linspace(lo, hi, 513)
    vals = np.array([f(d) for d in grid])
    pos = np.nonzero(vals > 0.0)[0]
    if pos.size == 0:
        raise DomainError("no positive debt limit: only autarky is sustainable")
    k = pos[-1]
    return float(brentq(f, grid[k], grid[k + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))


def critical_debt(params: EconomyParams, d0) -> float:
    """Threshold ``d^c`` below which next-period debt resets to ``d⁰``."""
    s, pi = params.s, params.pi
    d0 = np.asarray(d0, dtype=float)
    inner = np.sum(pi * (np.log1p(s * (d0 - 1.0)) - np.log1p(-s)))
    return float(-np.expm1(-params.beta * inner))


def bond_revenue_from_policy(params: EconomyParams, d, b):
    """``BR(d) = β Σ π(r) r b_r(d) (1 - d)/(1 - r(1 - b_r(d)))``.

    ``b`` has shape ``d.shape + (I,)``.
    """
    s, pi = params.s, params.pi
    d = np.asarray(d, dtype=float)
    b = np.asarray(b, dtype=float)
    m = (1.0 - d)[..., None] / (1.0 - s * (1.0 - b))
    return params.beta * np.sum(pi * s * b * m, axis=-1)


@dataclass(frozen=True)
class DebtSystem:
    """Debt policies, thresholds and fiscal curves.

    Attributes
    ----------
    d_grid : ndarray
        Uniform grid on ``[0, d_max]``.
    b : ndarray, shape (n, I)
        Debt policy ``b_r(d)`` on ``d_grid``.
    BR, tau : ndarray
        Bond revenue and fiscal reaction on ``d_grid``.
    d_bal : float or None
        Root of ``τ``; None if the bisection finds no sign change.
    """

    params: EconomyParams
    d_c: float
    d_max: float
    d_min: float
    d0: NDArray[np.float64]
    d_star: NDArray[np.float64]
    d_bal: float | None
    d_grid: NDArray[np.float64]
    b: NDArray[np.float64]
    BR: NDArray[np.float64]
    tau: NDArray[np.float64]
    _sol: object = field(repr=False, compare=False)

    def policy(self, d, r=None):
        """``b_r(d)``; all ``r`` when ``r`` is None.

        The policy does not depend on the current share; it is evaluated
        through state 1.
        """
        d = np.atleast_1d(np.asarray(d, dtype=float))
        if np.any(d > self.d_max + 1e-12) or np.any(d < -1e-12):
            raise DomainError("debt outside [0, d_max]")
        s = self.params.s
        omega = np.minimum(to_promise(s[0], np.clip(d, 0.0, None)), self._sol.omega_max[0])
        prom = self._sol.policy(0, omega).promises
        b = (np.expm1(prom) + s) / s
        b = np.where(d[:, None] <= self.d_c, self.d0, b)
        return b if r is None else b[:, r]

    def bond_revenue(self, d):
        d = np.atleast_1d(np.asarray(d, dtype=float))
        return bond_revenue_from_policy(self.params, d, self.policy(d))

    def fiscal_reaction(self, d):
        d = np.atleast_1d(np.asarray(d, dtype=float))
        return d - self.bond_revenue(d)

    def fixed_points(self) -> NDArray[np.float64]:
        """``d^f(r) = min{d*(r), d_max}``."""
        return np.minimum(self.d_star, self.d_max)

    def rows(self):
        """Rows ``(d, b_1..b_I, BR, tau)`` for CSV output."""
        for k, d in enumerate(self.d_grid):
            yield (d, *self.b[k], self.BR[k], self.tau[k])

    def header(self):
        return ["d"] + [f"b{r + 1}" for r in range(self.params.n_states)] + ["BR", "tau"]


def debt_system(sol, n_grid: int = N_DEBT_GRID) -> DebtSystem:
    """Tabulate the debt representation of a planner solution."""
    params = sol.params
    s = params.s
    d0 = (np.expm1(sol.omega0) + s) / s
    d_max = debt_limit(params)
    d_c = critical_debt(params, d0)
    grid = np.linspace(0.0, d_max, n_grid)
    base = DebtSystem(
        params=params, d_c=d_c, d_max=d_max, d_min=float(np.min(d0)), d0=d0,
        d_star=sol.first_best.d_star, d_bal=None, d_grid=grid,
        b=np.empty((0, params.n_states)), BR=np.empty(0), tau=np.empty(0), _sol=sol,
    )
    b = base.policy(grid)
    BR = bond_revenue_from_policy(params, grid, b)
    tau = grid - BR
    d_bal = None
    f = lambda x: float(base.fiscal_reaction(x)[0])
    if tau[0] < 0.0 < tau[-1]:
        k = int(np.nonzero(tau > 0.0)[0][0])
        d_bal = float(brentq(f, grid[k - 1], grid[k], xtol=1e-14))
    return DebtSystem(
        params=params, d_c=d_c, d_max=d_max, d_min=float(np.min(d0)), d0=d0,
        d_star=sol.first_best.d_star, d_bal=d_bal, d_grid=grid, b=b, BR=BR, tau=tau, _sol=sol,
    )
