"""First-best and deterministic benchmark economies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import brentq

from .core import EconomyParams, Preferences
from .errors import AutarkyOnly, DomainError


@dataclass(frozen=True)
class FirstBest:
    """Complete-insurance allocation that ignores the young's constraints.

    Attributes
    ----------
    c_star : ndarray
        Young consumption share in each state.
    omega_star : ndarray
        Log old-age share implied by ``c_star`` (floored at ω_min).
    v_star : ndarray
        Per-period planner payoff ``log c* + (β/δ) log(1 - c*)``.
    V_bar_star : float
        ``Σ π v* / (1 - δ)``.
    d_star : ndarray
        First-best debt ``1 - c*/s``.
    """

    beta: float
    delta: float
    shares: NDArray[np.float64]
    probs: NDArray[np.float64]
    c_star: NDArray[np.float64]
    omega_star: NDArray[np.float64]
    v_star: NDArray[np.float64]
    V_bar_star: float
    d_star: NDArray[np.float64]

    def value(self, s: int, omega):
        """V*(s, ω) for state index ``s``."""
        omega = np.asarray(omega, dtype=float)
        cont = self.delta * self.V_bar_star
        above = (self.beta / self.delta) * omega + np.log(-np.expm1(omega)) + cont
        return np.where(omega <= self.omega_star[s], self.v_star[s] + cont, above)

    def lam(self, s: int, omega):
        """Promise-keeping multiplier ``-(δ/β) V*_ω`` (``s`` unused)."""
        omega = np.asarray(omega, dtype=float)
        odds = np.exp(omega) / -np.expm1(omega)
        return np.maximum(0.0, (self.delta / self.beta) * odds - 1.0)

    def bond_revenue(self, d):
        """Bond revenue ``(a - 1)(1 - d)`` under complete insurance."""
        a = (1.0 - self.delta) + (self.beta + self.delta) * float(np.sum(self.probs * self.shares))
        return (a - 1.0) * (1.0 - np.asarray(d, dtype=float))


def first_best(params: EconomyParams) -> FirstBest:
    b, d = params.beta, params.delta
    s, pi = params.s, params.pi
    c = np.minimum(d / (b + d), s)
    v = np.log(c) + (b / d) * np.log1p(-c)
    return FirstBest(
        beta=b, delta=d, shares=s, probs=pi,
        c_star=c,
        omega_star=np.maximum(np.log1p(-s), np.log(b / (b + d))),
        v_star=v,
        V_bar_star=float(np.sum(pi * v) / (1.0 - d)),
        d_star=1.0 - c / s,
    )


# --------------------------------------------------------------------------
# deterministic economy

_MAX_STEPS = 100_000


@dataclass(frozen=True)
class DeterministicSolution:
    """Optimal sustainable allocation without endowment risk."""

    share: float
    beta: float
    delta: float
    upsilon_hat: float
    c_star: float
    c_min: float
    omega_min: float
    omega_star: float
    omega_max_det: float
    omega_c: float

    @property
    def first_best_sustainable(self) -> bool:
        return self.c_star > self.c_min

    @property
    def omega_target(self) -> float:
        return min(self.omega_star, self.omega_max_det)

    def _check(self, omega):
        omega = np.asarray(omega, dtype=float)
        if np.any(omega < self.omega_min - 1e-14) or np.any(omega > self.omega_max_det + 1e-14):
            raise DomainError("promise outside [omega_min, omega_max]")
        return omega

    def policy(self, omega):
        """Next-period promise g(ω)."""
        omega = self._check(omega)
        with np.errstate(invalid="ignore", divide="ignore"):
            up = (self.upsilon_hat - np.log(-np.expm1(omega))) / self.beta
        return np.where(omega <= self.omega_c, self.omega_target, np.minimum(up, self.omega_max_det))

    def ladder(self, n: int) -> NDArray[np.float64]:
        """Critical promises ω^c_0 = ω*, ω^c_1 = ω^c, ... up to index ``n``."""
        out = [self.omega_star]
        for _ in range(n):
            out.append(np.log(-np.expm1(self.upsilon_hat - self.beta * out[-1])))
        return np.array(out)

    def _v_stat(self):
        c = self.c_star
        return (np.log(c) + (self.beta / self.delta) * np.log1p(-c)) / (1.0 - self.delta)

    def _value_scalar(self, omega):
        bd = self.beta / self.delta
        if omega >= self.omega_max_det:
            return (np.log(self.c_min) + bd * self.omega_max_det) / (1.0 - self.delta)
        acc, disc = 0.0, 1.0
        for _ in range(_MAX_STEPS):
            if omega <= self.omega_star:
                return acc + disc * self._v_stat()
            acc += disc * (np.log(-np.expm1(omega)) + bd * omega)
            disc *= self.delta
            omega = float(self.policy(omega))
        return acc + disc * self._value_scalar(self.omega_max_det)

    def value(self, omega):
        """V(ω) by unrolling the ladder recursion from ω down to ω*."""
        omega = self._check(omega)
        return np.vectorize(self._value_scalar, otypes=[float])(omega)

    def path(self, omega0: float, max_steps: int = 10_000):
        """Promise path from ``omega0`` until it reaches the stationary target.

        Returns
        -------
        path : ndarray
            ω_0, ω_1, ..., ω_T with ω_T equal to the target.
        T : int
            Hitting time.
        """
        omega = [float(self._check(omega0))]
        for _ in range(max_steps):
            if omega[-1] <= self.omega_target:
                break
            omega.append(float(self.policy(omega[-1])))
        else:
            raise DomainError("path did not reach the stationary promise")
        return np.array(omega), len(omega) - 1


def deterministic_solve(s: float, prefs: Preferences) -> DeterministicSolution:
    """Solve the single-state economy with share ``s`` for the young."""
    b, d = prefs.beta, prefs.delta
    if not (0.0 < s < 1.0):
        raise DomainError("share must lie in (0, 1)")
    if s <= 1.0 / (1.0 + b):
        raise AutarkyOnly("s <= 1/(1+beta): only autarky is sustainable")
    uhat = np.log(s) + b * np.log1p(-s)
    # c -> log c + β log(1-c) peaks at 1/(1+β); the root below the peak is c_min
    resid = lambda c: np.log(c) + b * np.log1p(-c) - uhat
    c_min = brentq(resid, 1e-12, 1.0 / (1.0 + b), xtol=1e-16, rtol=4 * np.finfo(float).eps)
    c_star = min(d / (b + d), s)
    om_star = max(np.log1p(-s), np.log(b / (b + d)))
    om_max = float(np.log1p(-c_min))
    target = min(om_star, om_max)
    om_c = float(np.log(-np.expm1(uhat - b * target)))
    return DeterministicSolution(
        share=float(s), beta=b, delta=d, upsilon_hat=float(uhat),
        c_star=float(c_star), c_min=float(c_min), omega_min=float(np.log1p(-s)),
        omega_star=float(om_star), omega_max_det=om_max, omega_c=om_c,
    )
