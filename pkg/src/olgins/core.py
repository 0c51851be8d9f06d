"""Model primitives, autarky quantities and assumption checks.

All utilities are in nats, shares and debt are dimensionless. States are
indexed ``0..I-1`` internally; the user-facing ``initial_state`` is 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import brentq

from .errors import InvalidParameters, NoNontrivialBound

PROB_TOL = 1e-12


def _as_prob_vector(p, name):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidParameters(f"{name} must be a non-empty 1-d vector")
    if np.any(~np.isfinite(p)) or np.any(p <= 0.0) or np.any(p >= 1.0 + PROB_TOL):
        raise InvalidParameters(f"{name} entries must lie in (0, 1]")
    if abs(p.sum() - 1.0) > PROB_TOL:
        raise InvalidParameters(f"{name} must sum to one (sum={p.sum():.17g})")
    return p / p.sum()


@dataclass(frozen=True)
class EndowmentProcess:
    """I.i.d. endowment share of the young.

    Parameters
    ----------
    shares : array_like
        Strictly ascending shares in (0, 1).
    probs : array_like
        Probabilities of each share.
    """

    shares: NDArray[np.float64]
    probs: NDArray[np.float64]

    def __post_init__(self):
        s = np.asarray(self.shares, dtype=float)
        if s.ndim != 1 or s.size == 0:
            raise InvalidParameters("shares must be a non-empty 1-d vector")
        if np.any(s <= 0.0) or np.any(s >= 1.0):
            raise InvalidParameters("shares must lie in (0, 1)")
        if np.any(np.diff(s) <= 0.0):
            raise InvalidParameters("shares must be strictly ascending")
        p = np.asarray(self.probs, dtype=float)
        if p.shape != s.shape:
            raise InvalidParameters("shares and probs must have equal length")
        p = _as_prob_vector(p, "probs")
        s.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "shares", s)
        object.__setattr__(self, "probs", p)

    @property
    def n_states(self) -> int:
        return int(self.shares.size)


@dataclass(frozen=True)
class GrowthProcess:
    """I.i.d. aggregate growth factors."""

    factors: NDArray[np.float64] = field(default_factory=lambda: np.array([1.0]))
    probs: NDArray[np.float64] = field(default_factory=lambda: np.array([1.0]))

    def __post_init__(self):
        g = np.asarray(self.factors, dtype=float)
        if g.ndim != 1 or g.size == 0 or np.any(g <= 0.0):
            raise InvalidParameters("growth factors must be positive")
        p = np.asarray(self.probs, dtype=float)
        if p.shape != g.shape:
            raise InvalidParameters("growth factors and probs must have equal length")
        p = _as_prob_vector(p, "growth probs")
        g.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "factors", g)
        object.__setattr__(self, "probs", p)

    @property
    def harmonic_mean(self) -> float:
        return float(1.0 / np.sum(self.probs / self.factors))

    @property
    def mean(self) -> float:
        return float(np.sum(self.probs * self.factors))

    @property
    def degenerate(self) -> bool:
        return bool(np.ptp(self.factors) == 0.0)


@dataclass(frozen=True)
class Preferences:
    """Generational discount ``beta`` and planner discount ``delta``."""

    beta: float
    delta: float

    def __post_init__(self):
        if not (0.0 < self.beta <= 1.0):
            raise InvalidParameters("beta must lie in (0, 1]")
        if not (0.0 < self.delta < 1.0):
            raise InvalidParameters("delta must lie in (0, 1)")


@dataclass(frozen=True)
class EconomyParams:
    """Complete parameterisation of the economy.

    ``initial_state`` is 1-based. ``initial_target`` is the minimum log
    consumption share promised to the initial old, if any.
    """

    endowments: EndowmentProcess
    prefs: Preferences
    growth: GrowthProcess = field(default_factory=GrowthProcess)
    initial_state: int = 1
    initial_target: float | None = None

    def __post_init__(self):
        n = self.endowments.n_states
        if not (1 <= self.initial_state <= n):
            raise InvalidParameters(f"initial_state must be in 1..{n}")
        if self.initial_target is not None:
            lo = np.log1p(-self.endowments.shares[self.initial_state - 1])
            if not (lo <= self.initial_target < 0.0):
                raise InvalidParameters("initial_target must lie in [log(1-s0), 0)")

    @property
    def s(self) -> NDArray[np.float64]:
        return self.endowments.shares

    @property
    def pi(self) -> NDArray[np.float64]:
        return self.endowments.probs

    @property
    def beta(self) -> float:
        return self.prefs.beta

    @property
    def delta(self) -> float:
        return self.prefs.delta

    @property
    def n_states(self) -> int:
        return self.endowments.n_states

    @property
    def s0(self) -> int:
        """0-based initial state."""
        return self.initial_state - 1


def make_params(shares, probs, beta, delta, growth=None, growth_probs=None,
                initial_state=1, initial_target=None) -> EconomyParams:
    """Convenience constructor from plain sequences."""
    g = GrowthProcess() if growth is None else GrowthProcess(growth, growth_probs)
    return EconomyParams(
        endowments=EndowmentProcess(shares, probs),
        prefs=Preferences(float(beta), float(delta)),
        growth=g,
        initial_state=initial_state,
        initial_target=initial_target,
    )


def example1(kappa=0.6, eps=0.1, pi=0.5, beta=None, delta=None) -> EconomyParams:
    """Two-state example with mean share ``kappa`` and spread ``eps``.

    Shares are ``kappa - eps (1 - pi)/pi`` with probability ``pi`` and
    ``kappa + eps`` otherwise; β = δ = exp(-1/75) unless given.
    """
    b = np.exp(-1.0 / 75.0) if beta is None else beta
    d = np.exp(-1.0 / 75.0) if delta is None else delta
    return make_params([kappa - eps * (1.0 - pi) / pi, kappa + eps], [pi, 1.0 - pi], b, d)


def three_state() -> EconomyParams:
    """Three-state example with shares 0.5, 0.625, 0.8125."""
    b = np.exp(-1.0 / 75.0)
    return make_params([0.5, 0.625, 0.8125], [0.5, 0.25, 0.25], b, b)


# --------------------------------------------------------------------------
# autarky


def upsilon_hat(params: EconomyParams) -> NDArray[np.float64]:
    """Lifetime autarky utility of a young agent born in each state."""
    s, pi = params.s, params.pi
    return np.log(s) + params.beta * np.sum(pi * np.log1p(-s))


def qhat_matrix(params: EconomyParams):
    """Autarky state-price matrix and its Perron root.

    Returns
    -------
    Q : ndarray, shape (I, I)
        ``Q[s, r] = π(r) β s / (1 - r)``.
    root : float
        Perron root. The matrix has rank one so the root is its trace.
    """
    s, pi = params.s, params.pi
    Q = params.beta * np.outer(s, pi / (1.0 - s))
    return Q, float(np.trace(Q))


@dataclass(frozen=True)
class AutarkyData:
    """Autarky utilities and promise bounds."""

    upsilon_hat: NDArray[np.float64]
    omega_min: NDArray[np.float64]
    omega_max: NDArray[np.float64]
    gamma_bar: float
    delta_varpi: float

    def residuals(self, params: EconomyParams) -> NDArray[np.float64]:
        """Residual of the upper-bound system in each state."""
        dv = np.sum(params.pi * (self.omega_max - self.omega_min))
        return (np.log(-np.expm1(self.omega_max)) - np.log(-np.expm1(self.omega_min))
                + params.beta * dv)


def _bound_map(delta_varpi, s, pi, beta):
    return np.sum(pi * (np.log1p(-s * np.exp(-beta * delta_varpi)) - np.log1p(-s))) - delta_varpi


def autarky(params: EconomyParams) -> AutarkyData:
    """Autarky utilities and the promise bounds ω_min, ω_max.

    The upper bound system collapses to a scalar fixed point in
    ``Δϖ = Σ π(r)(ω_max(r) − ω_min(r))``; ``Δϖ = 0`` is always a root and the
    nontrivial one exists iff the slope of the map at zero exceeds one.
    """
    s, pi, beta = params.s, params.pi, params.beta
    _, root = qhat_matrix(params)
    if root <= 1.0:
        raise NoNontrivialBound(
            f"trace of autarky price matrix is {root:.6g} <= 1; only the autarkic bound exists")
    hi = float(np.sum(pi * -np.log1p(-s)))
    lo = hi
    while _bound_map(lo, s, pi, beta) <= 0.0:
        lo *= 0.5
        if lo < 1e-300:
            raise NoNontrivialBound("could not bracket a positive promise-bound root")
    dv = brentq(_bound_map, lo, hi, args=(s, pi, beta), xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return AutarkyData(
        upsilon_hat=upsilon_hat(params),
        omega_min=np.log1p(-s),
        omega_max=np.log1p(-s * np.exp(-beta * dv)),
        gamma_bar=params.growth.harmonic_mean,
        delta_varpi=float(dv),
    )


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ValidationReport:
    """Assumption checks with their margins."""

    trace_qhat: float
    gamma_bar: float
    a3_slack: float
    a4_gap: float

    @property
    def a2(self) -> bool:
        return self.trace_qhat > self.gamma_bar

    @property
    def a3(self) -> bool:
        return self.a3_slack >= 0.0

    @property
    def a4(self) -> bool:
        return self.a4_gap < 0.0

    @property
    def passed(self) -> bool:
        return self.a2 and self.a3 and self.a4

    def summary(self) -> str:
        flag = {True: "pass", False: "FAIL"}
        return "\n".join([
            f"nonautarky  trace(Qhat)={self.trace_qhat:.6f} gamma_bar={self.gamma_bar:.6f}  {flag[self.a2]}",
            f"low share   slack={self.a3_slack:.6g}  {flag[self.a3]}",
            f"binding     gap={self.a4_gap:.6g}  {flag[self.a4]}",
        ])

    def as_dict(self) -> dict:
        return {
            "trace_qhat": self.trace_qhat, "gamma_bar": self.gamma_bar,
            "a3_slack": self.a3_slack, "a4_gap": self.a4_gap,
            "a2": self.a2, "a3": self.a3, "a4": self.a4, "passed": self.passed,
        }


def first_best_share(params: EconomyParams) -> NDArray[np.float64]:
    b, d = params.beta, params.delta
    return np.minimum(d / (b + d), params.s)


def validate(params: EconomyParams) -> ValidationReport:
    """Evaluate the maintained assumptions and report their margins."""
    b, d = params.beta, params.delta
    s, pi = params.s, params.pi
    _, root = qhat_matrix(params)
    c = first_best_share(params)
    gap = (np.log(c[-1]) + b * np.sum(pi * np.log1p(-c))) - upsilon_hat(params)[-1]
    return ValidationReport(
        trace_qhat=root,
        gamma_bar=params.growth.harmonic_mean,
        a3_slack=float(d / (b + d) - s[0]),
        a4_gap=float(gap),
    )
