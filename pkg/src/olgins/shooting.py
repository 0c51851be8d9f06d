"""Forward shooting for the two-state economy.

When every state-1 draw resets the promise, the allocation depends only on
the number ``n`` of consecutive state-2 draws. With ``ν^(n) = 1 + μ^(n)`` the
young's consumption shares are

    c^(n)(1) = δ / (β ν^(n-1) + δ),
    c^(n)(2) = δ ν^(n) / (β ν^(n-1) + δ ν^(n)),

and the binding state-2 participation constraint links ``ν^(n-1)``,
``ν^(n)`` and ``ν^(n+1)``. The saddle path is found by bisection on ``ν^(0)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import brentq, root

from .core import EconomyParams, upsilon_hat, validate
from .debt import critical_debt, debt_limit
from .errors import AssumptionViolation, ShootDiverged


def _require_two_states(params: EconomyParams):
    if params.n_states != 2:
        raise AssumptionViolation("shooting needs exactly two endowment states")


def _d2_residual(nu, params):
    b, d = params.beta, params.delta
    pi = params.pi[0]
    lhs = np.log(d / (b + d)) + b * (pi * np.log(b * nu / (b * nu + d)) + (1 - pi) * np.log(b / (b + d)))
    return lhs - upsilon_hat(params)[1]


def chi(params: EconomyParams) -> float:
    """The product ``χ`` that pins down the long-run multiplier."""
    _require_two_states(params)
    b, d = params.beta, params.delta
    pi = params.pi[0]
    s1, s2 = params.s
    log_chi = (((1 - pi) / pi) * np.log(d / b)
               + ((1 + b * (1 - pi)) / (b * pi)) * np.log((b + d) / d)
               + np.log(s2) / (b * pi)
               + ((1 - pi) / pi) * np.log1p(-s2)
               + np.log1p(-s1))
    return float(np.exp(log_chi))


def nu_infinity(params: EconomyParams) -> float:
    """Closed-form limit ``ν^(∞)`` of the multiplier ladder.

    Raises
    ------
    AssumptionViolation
        If the closed form is not a valid multiplier (``χ ∉ (0, 1)`` or
        ``ν^(∞) < 1``).
    """
    _require_two_states(params)
    x = chi(params)
    if not (0.0 < x < 1.0):
        raise AssumptionViolation(f"chi = {x:.6g} outside (0, 1)")
    nu = (params.delta / params.beta) / (1.0 / x - 1.0)
    if not nu >= 1.0:
        raise AssumptionViolation(f"nu_infinity = {nu:.6g} < 1: the state-2 constraint does not bind")
    return float(nu)


def nu_infinity_bisect(params: EconomyParams) -> float:
    """``ν^(∞)`` by root finding on the limiting participation constraint."""
    _require_two_states(params)
    f = lambda nu: _d2_residual(nu, params)
    hi = 2.0
    while f(hi) < 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise AssumptionViolation("no finite long-run multiplier")
    return float(brentq(f, 1e-12, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def chi_upsilon(params: EconomyParams):
    """``(χ, Υ)`` with ``Υ = log(δ/β) − log(χ^{-1} − 1)``."""
    x = chi(params)
    if not (0.0 < x < 1.0):
        raise AssumptionViolation(f"chi = {x:.6g} outside (0, 1)")
    return x, float(np.log(params.delta / params.beta) - np.log(1.0 / x - 1.0))


def consumption_ladder(params: EconomyParams, nu):
    """Shares ``c^(n)(1), c^(n)(2)`` for ``ν = (ν^(-1), ν^(0), ...)``."""
    b, d = params.beta, params.delta
    nu = np.asarray(nu, dtype=float)
    prev, cur = nu[:-1], nu[1:]
    c1 = d / (b * prev + d)
    c2 = d * cur / (b * prev + d * cur)
    return c1, c2


def _next_nu(params, nu_prev, nu_cur):
    """Solve the binding state-2 constraint for ``ν^(n+1)``."""
    b, d = params.beta, params.delta
    pi = params.pi[0]
    c2 = d * nu_cur / (b * nu_prev + d * nu_cur)
    rest = upsilon_hat(params)[1] - np.log(c2) - b * pi * np.log(b * nu_cur / (b * nu_cur + d))
    q = np.exp(rest / (b * (1.0 - pi)))
    return b * nu_cur * (1.0 / q - 1.0) / d


def constraint_residuals(params: EconomyParams, nu) -> NDArray[np.float64]:
    """Residual of the binding state-2 constraint at each interior ``n``."""
    b, d = params.beta, params.delta
    pi = params.pi[0]
    nu = np.asarray(nu, dtype=float)
    prev, cur, nxt = nu[:-2], nu[1:-1], nu[2:]
    lhs = (np.log(d * cur / (b * prev + d * cur))
           + b * (pi * np.log(b * cur / (b * cur + d)) + (1 - pi) * np.log(b * cur / (b * cur + d * nxt))))
    return lhs - upsilon_hat(params)[1]


def _forward(params, nu0, n_steps, nu_inf):
    """Iterate the recursion from ``(1, ν0)``.

    Returns the sequence and a classification: +1 if it overshoots
    ``ν^(∞)`` before the last step, -1 if it turns down, 0 otherwise.
    """
    seq = [1.0, float(nu0)]
    for k in range(n_steps):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            nxt = float(_next_nu(params, seq[-2], seq[-1]))
        if not np.isfinite(nxt) or nxt < seq[-1]:
            return seq, -1
        seq.append(nxt)
        if nxt > nu_inf and k < n_steps - 1:
            return seq, 1
    return seq, 0


@dataclass(frozen=True)
class NuLadder:
    """Saddle-path multipliers and consumption ladders.

    Attributes
    ----------
    nu : ndarray
        ``ν^(n)`` for ``n = -1, 0, ..., N``; ``nu[0] = 1``.
    nu_inf : float
        Closed-form limit.
    c1, c2 : ndarray
        ``c^(n)(1)`` and ``c^(n)(2)`` for ``n = 0..N``.
    trace : list of float
        Bisection midpoints for ``ν^(0)``.
    """

    params: EconomyParams
    nu: NDArray[np.float64]
    nu_inf: float
    c1: NDArray[np.float64]
    c2: NDArray[np.float64]
    trace: list

    @property
    def nu0(self) -> float:
        return float(self.nu[1])

    @property
    def mu(self) -> NDArray[np.float64]:
        return self.nu[1:] - 1.0

    @property
    def d1(self) -> NDArray[np.float64]:
        return 1.0 - self.c1 / self.params.s[0]

    @property
    def d2(self) -> NDArray[np.float64]:
        return 1.0 - self.c2 / self.params.s[1]

    @property
    def omega2(self) -> NDArray[np.float64]:
        """Promise to the old in state 2 after ``n`` state-2 draws."""
        return np.log1p(-self.c2)

    def rows(self):
        for n in range(self.c1.size):
            yield n, self.nu[n + 1], self.c1[n], self.c2[n], self.d1[n], self.d2[n]

    header = ("n", "nu", "c1", "c2", "d1", "d2")


def bisect_nu0(params: EconomyParams, nu_inf: float | None = None, probe: int = 200):
    """Saddle-path ``ν^(0)`` by bisection over ``[1, ν^(∞)]``.

    A trial value is too high when its forward path overshoots ``ν^(∞)`` and
    too low when the path turns down. Returns ``(ν0, trace)``; ``ν0`` is
    accurate to rounding, but the forward path from it still leaves the
    saddle after a few dozen steps because the recursion is unstable.
    """
    nu_inf = nu_infinity(params) if nu_inf is None else nu_inf
    lo, hi = 1.0, nu_inf
    trace = []
    while hi - lo > 4 * np.finfo(float).eps * hi:
        mid = 0.5 * (lo + hi)
        trace.append(mid)
        _, cls = _forward(params, mid, probe, nu_inf)
        if cls > 0:
            hi = mid
        elif cls < 0:
            lo = mid
        else:
            return mid, trace
        if len(trace) > 200:
            break
    if lo == 1.0 or hi == nu_inf:
        raise ShootDiverged("bisection on the initial multiplier did not bracket the saddle path", trace)
    return 0.5 * (lo + hi), trace


def shoot(params: EconomyParams, N: int = 20, tol: float = 1e-10) -> NuLadder:
    """Saddle-path ladder with ``ν^(N)`` within ``tol`` of ``ν^(∞)``.

    The bisection on ``ν^(0)`` seeds the ladder. Its forward path cannot
    hold ``|ν^(N) − ν^(∞)| < tol`` for moderate ``N`` in double precision,
    so the ladder is then solved as a two-point problem: the binding state-2
    constraints at ``n = 0..N-1`` with ``ν^(-1) = 1`` and ``ν^(N) = ν^(∞)``.

    Raises
    ------
    ShootDiverged
        If the bisection cannot bracket the saddle path or the two-point
        problem does not solve to ``tol``.
    """
    _require_two_states(params)
    if N < 1:
        raise ValueError("N must be positive")
    rep = validate(params)
    if not rep.passed:
        raise AssumptionViolation("parameters fail the maintained assumptions:\n" + rep.summary())
    nu_inf = nu_infinity(params)
    nu0, trace = bisect_nu0(params, nu_inf)
    seq, _ = _forward(params, nu0, N, nu_inf)
    guess = np.full(N, nu_inf)
    run = np.asarray(seq[1:N + 1])
    guess[:run.size] = np.minimum(run, nu_inf)

    def resid(z):
        nu = np.concatenate([[1.0], np.exp(z), [nu_inf]])
        return constraint_residuals(params, nu)

    out = root(resid, np.log(guess), method="hybr", options={"xtol": 1e-15})
    nu = np.concatenate([[1.0], np.exp(out.x), [nu_inf]])
    worst = float(np.max(np.abs(constraint_residuals(params, nu))))
    if worst > tol or np.any(np.diff(nu) < 0.0):
        raise ShootDiverged(f"two-point ladder problem failed (residual {worst:.3g})", trace)
    c1, c2 = consumption_ladder(params, nu)
    return NuLadder(params=params, nu=nu, nu_inf=nu_inf, c1=c1, c2=c2, trace=trace)


@dataclass(frozen=True)
class Assumption5Report:
    """Both parts of the two-state reset condition with margins.

    ``debt_limit_margin = d_max − d*(2)`` and
    ``reset_margin = d^c − b_1(d*(2))``; positive margins pass.
    """

    d_star2: float
    d_max: float
    b1_at_d_star2: float
    d_c: float

    @property
    def debt_limit_margin(self) -> float:
        return self.d_max - self.d_star2

    @property
    def reset_margin(self) -> float:
        return self.d_c - self.b1_at_d_star2

    @property
    def part_i(self) -> bool:
        return self.debt_limit_margin > 0.0

    @property
    def part_ii(self) -> bool:
        return self.reset_margin > 0.0

    @property
    def passed(self) -> bool:
        return self.part_i and self.part_ii

    def as_dict(self) -> dict:
        return {
            "d_star2": self.d_star2, "d_max": self.d_max,
            "b1_at_d_star2": self.b1_at_d_star2, "d_c": self.d_c,
            "debt_limit_margin": self.debt_limit_margin, "reset_margin": self.reset_margin,
            "part_i": self.part_i, "part_ii": self.part_ii, "passed": self.passed,
        }


def check_assumption5(params: EconomyParams, sol=None) -> Assumption5Report:
    """Evaluate the two-state reset condition.

    With ``sol`` the reset debts and ``b_1(d*(2))`` come from the planner
    policies; otherwise from the closed forms of the shooting ladder.
    """
    _require_two_states(params)
    b, d = params.beta, params.delta
    s1, s2 = params.s
    d0 = None
    d_star2 = 1.0 - d / ((b + d) * s2)
    d_max = debt_limit(params)
    if sol is not None:
        from .debt import to_promise

        d0 = (np.expm1(sol.omega0) + params.s) / params.s
        omega = min(float(to_promise(s2, min(d_star2, d_max))), float(sol.omega_max[1]))
        g1 = float(sol.policy(1, [omega]).promises[0, 0])
        b1 = (np.expm1(g1) + s1) / s1
    else:
        x = chi(params)
        b1 = (x - 1.0 + s1) / s1
        try:
            lad = shoot(params)
            d0 = np.array([lad.d1[0], lad.d2[0]])
        except (ShootDiverged, AssumptionViolation):
            # no ladder: the reset part cannot be evaluated and is reported as failing
            d0 = None
    d_c = np.nan if d0 is None else critical_debt(params, d0)
    return Assumption5Report(d_star2=float(d_star2), d_max=float(d_max),
                             b1_at_d_star2=float(b1), d_c=float(d_c))
