"""Value-function iteration for the constrained planner problem.

The state is ``(s, ω)``: today's endowment share index and the log
consumption share promised to the current old. For a fixed multiplier ``μ``
on the young's participation constraint the first-order conditions pin down
consumption and every next-period promise in closed form, so each grid point
reduces to a monotone scalar root in ``μ``.

Representation of an iterate ``J(s, ·)``:

* flat on ``[ω_min(s), ω⁰(s)]`` where the promise-keeping multiplier is zero;
* a cubic Hermite interpolant on Chebyshev-Lobatto nodes spanning
  ``[ω⁰(s), ω_max(s)]`` whose node slopes are ``-(β/δ) λ``;
* the inverse of the multiplier map, ``ω = h_s^{-1}(μ)``, as a monotone
  PCHIP interpolant in ``t = log(1 + μ)``.

The multiplier ``λ`` at every node comes from the envelope condition, so
the slopes are exact at the nodes rather than differentiated splines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.optimize import brentq

from .benchmarks import FirstBest, first_best
from .core import AutarkyData, EconomyParams, autarky, validate
from .errors import AssumptionViolation, ConvergenceError, DomainError, InfeasibleTarget

DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class GridConfig:
    """Numerical settings for the value-function iteration.

    Parameters
    ----------
    gp : int
        Chebyshev nodes per state.
    tol : float
        Sup-norm tolerance between successive value iterates.
    max_iters : int
        Sweep cap.
    lam_cap : float
        Cap on queried multipliers near the upper promise bound.
    extrapolate : bool
        After each sweep add the constant that removes the level drift
        measured at the regeneration point ``(1, ω⁰(1))``. A constant shift
        never changes policies; it only removes the slow geometric decay of
        the value level.
    eval_passes : int
        Fixed-plan evaluation passes after each Bellman sweep (modified
        policy iteration). Zero gives plain value-function iteration.
    bisect_iters : int
        Bisection steps for the multiplier root.
    """

    gp: int = 200
    tol: float = 1e-6
    max_iters: int = 500
    lam_cap: float = 1e8
    extrapolate: bool = True
    eval_passes: int = 20
    bisect_iters: int = 64

    def __post_init__(self):
        if self.gp < 50:
            raise ValueError("gp must be at least 50")
        if self.eval_passes < 0:
            raise ValueError("eval_passes must be nonnegative")
        if self.tol <= 0 or self.max_iters < 1 or self.lam_cap <= 0:
            raise ValueError("tol, max_iters and lam_cap must be positive")


def chebyshev_lobatto(a: float, b: float, n: int) -> NDArray[np.float64]:
    """``n`` Chebyshev extrema on ``[a, b]`` including both endpoints."""
    k = np.arange(n)
    x = 0.5 * (a + b) - 0.5 * (b - a) * np.cos(np.pi * k / (n - 1))
    x[0], x[-1] = a, b
    return x


# interior nodes next to ω_max left to the power-law tail in the inverse map
_TAIL_SKIP = 2


def _odds(omega):
    # e^ω / (1 - e^ω)
    return np.exp(omega) / -np.expm1(omega)


def tail_exponent(params: EconomyParams, aut: AutarkyData) -> float:
    """Exponent k in ``ω_max(s) − ω ∝ (1 + λ)^(−k)`` as ω → ω_max(s).

    Linearising the binding participation constraint and the multiplier
    updating rule at ω_max gives ``β (δ/β)^k Σ π(r) odds(r)^(k−1) = 1`` with
    ``odds = e^ω / (1 − e^ω)`` at the bound. Falls back to 1 without a root.
    """
    b, d, pi = params.beta, params.delta, params.pi
    odds = _odds(aut.omega_max)
    f = lambda k: np.log(b) + k * np.log(d / b) + np.log(np.sum(pi * odds ** (k - 1.0)))
    try:
        return float(brentq(f, 0.05, 20.0))
    except ValueError:
        return 1.0


@dataclass
class _StateTable:
    """Iterate for one state. Built once per sweep, then read only."""

    omega0: float
    lam0: float
    nodes: NDArray[np.float64]
    V: NDArray[np.float64]
    lam: NDArray[np.float64]
    omega_max: float
    beta_over_delta: float
    singular_top: bool = False
    tail_rate: float = 1.0
    omega_c: float = float("nan")
    _value: object = field(init=False, repr=False)
    _inv: object = field(init=False, repr=False)
    t_lo: float = field(init=False)
    t_hi: float = field(init=False)

    def __post_init__(self):
        x, V, lam = self.nodes, self.V, self.lam
        # Hermite with envelope slopes up to the last interior node; the final
        # interval, where V_ω may diverge, is linear
        slope = -self.beta_over_delta * lam[:-1]
        self._value = CubicHermiteSpline(x[:-1], V[:-1], slope, extrapolate=False)
        self._dvalue = self._value.derivative()
        t = np.log1p(np.maximum.accumulate(lam))
        keep = np.concatenate([[True], np.diff(t) > 0.0])
        if self.singular_top:
            keep[-1 - _TAIL_SKIP:] = False
        tk, xk = t[keep], x[keep]
        # below ω_c the multiplier map is closed form; the interpolant starts
        # at the kink instead of bridging it
        self._t_c = -np.inf
        if self.omega_c > self.omega0 and self.omega_c < x[-2]:
            self._t_c = float(np.log(self.beta_over_delta ** -1 * _odds(self.omega_c)))
            right = (xk > self.omega_c) & (tk > self._t_c)
            tk = np.concatenate([[float(t[0]), self._t_c], tk[right]])
            xk = np.concatenate([[float(x[0]), self.omega_c], xk[right]])
        self._inv = PchipInterpolator(tk, xk, extrapolate=False) if tk.size >= 2 else None
        self.t_lo, self.t_hi = float(t[0]), float(tk[-1])
        self._t_top = float(t[-1])
        self._x_hi = float(xk[-1])
        # past the last interior node the distance to ω_max decays like a
        # power of 1/(1 + λ); see tail_exponent
        self._tail = self.tail_rate if self.singular_top else 0.0

    def value(self, omega):
        omega = np.asarray(omega, dtype=float)
        x, V = self.nodes, self.V
        inner = np.clip(omega, self.omega0, x[-2])
        top = V[-2] + (V[-1] - V[-2]) * (omega - x[-2]) / (x[-1] - x[-2])
        out = np.where(omega <= self.omega0, V[0], self._value(inner))
        return np.where(omega > x[-2], top, out)

    def dvalue(self, omega):
        omega = np.asarray(omega, dtype=float)
        x, V = self.nodes, self.V
        inner = np.clip(omega, self.omega0, x[-2])
        top = (V[-1] - V[-2]) / (x[-1] - x[-2])
        out = np.where(omega <= self.omega0, 0.0, self._dvalue(inner))
        return np.where(omega > x[-2], top, out)

    def promise(self, t):
        """Clamped inverse multiplier map ``g = h^{-1}(μ)`` with ``t = log(1+μ)``."""
        t = np.asarray(t, dtype=float)
        if self._inv is None:
            return np.full(t.shape, self.omega_max)
        mid = self._inv(np.clip(t, self.t_lo, self.t_hi))
        if np.isfinite(self._t_c):
            odds = self.beta_over_delta * np.exp(np.clip(t, self.t_lo, self._t_c))
            mid = np.where(t <= self._t_c, np.log(odds / (1.0 + odds)), mid)
        out = np.where(t <= self.t_lo, self.omega0, mid)
        if self.singular_top and self._tail > 0.0:
            x_hi = self._x_hi
            tail = self.omega_max - (self.omega_max - x_hi) * np.exp(
                -self._tail * np.maximum(t - self.t_hi, 0.0))
            out = np.where(t > self.t_hi, tail, out)
            return np.where(t >= self._t_top, self.omega_max, out)
        return np.where(t >= self.t_hi, self.omega_max, out)

    def to_dict(self):
        return {
            "omega0": self.omega0, "lam0": self.lam0, "nodes": self.nodes.tolist(),
            "V": self.V.tolist(), "lam": self.lam.tolist(),
            "singular_top": self.singular_top,
            "tail_rate": self.tail_rate,
            "omega_c": None if np.isnan(self.omega_c) else self.omega_c,
        }


@dataclass(frozen=True)
class Policy:
    """Policies and multipliers at a batch of states ``(s, ω)``.

    Attributes
    ----------
    c : ndarray
        Young consumption share ``f(s, ω)``.
    promises : ndarray, shape (n, I)
        Next-period promises ``g_r(s, ω)``.
    mu, lam : ndarray
        Multipliers on the young's constraint and on promise keeping.
    xi, eta : ndarray, shape (n, I)
        Multipliers on the upper and lower promise bounds.
    """

    c: NDArray[np.float64]
    promises: NDArray[np.float64]
    mu: NDArray[np.float64]
    lam: NDArray[np.float64]
    xi: NDArray[np.float64]
    eta: NDArray[np.float64]


class _Operator:
    """One Bellman step built on a fixed iterate."""

    def __init__(self, params: EconomyParams, aut: AutarkyData, tables, cfg: GridConfig):
        self.p = params
        self.aut = aut
        self.tables = tables
        self.cfg = cfg
        self.t_cap = float(np.log1p(cfg.lam_cap))
        self.tail_rate = tail_exponent(params, aut)

    def G(self, t):
        """Expected next-period promise ``Σ π(r) g_r`` at ``t = log(1+μ)``."""
        acc = np.zeros(np.shape(t))
        for r, tab in enumerate(self.tables):
            acc = acc + self.p.pi[r] * tab.promise(t)
        return acc

    def _smallest_root(self, gap_fn):
        """Smallest ``t ≥ 0`` with ``gap_fn(t) ≥ 0``, capped at ``t_cap``."""
        g0 = gap_fn(np.zeros(self._n))
        lo = np.zeros(self._n)
        hi = np.full(self._n, self.t_cap)
        need = g0 < 0.0
        for _ in range(self.cfg.bisect_iters):
            mid = 0.5 * (lo + hi)
            ok = gap_fn(mid) >= 0.0
            hi = np.where(need & ok, mid, hi)
            lo = np.where(need & ~ok, mid, lo)
        return np.where(need, hi, 0.0)

    def reset_levels(self):
        """ω⁰(s), c⁰(s), μ⁰(s) and λ at ω⁰ for every state."""
        b, d = self.p.beta, self.p.delta
        s, uhat = self.p.s, self.aut.upsilon_hat
        self._n = s.size

        def c_free(t):
            nu = np.exp(t)
            return np.minimum(d * nu / (b + d * nu), s)

        t0 = self._smallest_root(lambda t: np.log(c_free(t)) + b * self.G(t) - uhat)
        c0 = c_free(t0)
        om0 = np.minimum(np.log1p(-c0), self.aut.omega_max)
        lam0 = np.maximum(0.0, (d / b) * np.exp(t0) * _odds(om0) - 1.0)
        return om0, c0, np.expm1(t0), lam0

    def node_solve(self, s_idx, omega):
        """Multiplier ``t = log(1+μ)`` at states where promise keeping binds."""
        b = self.p.beta
        target = self.aut.upsilon_hat[s_idx] - np.log(-np.expm1(omega))
        self._n = omega.size
        return self._smallest_root(lambda t: b * self.G(t) - target)

    def continuation(self, t):
        """``Σ π(r) J(r, g_r)`` and the promise matrix at multipliers ``t``."""
        prom = np.stack([tab.promise(t) for tab in self.tables], axis=-1)
        cont = np.zeros(np.shape(t))
        for r, tab in enumerate(self.tables):
            cont = cont + self.p.pi[r] * tab.value(prom[..., r])
        return cont, prom


@dataclass
class PlannerSolution:
    """Converged value and multiplier tables with policy evaluation.

    Use :meth:`policy` for batch queries and :meth:`policy_eval` for a single
    state. Tables are not modified after construction.
    """

    params: EconomyParams
    autarky: AutarkyData
    first_best: FirstBest
    config: GridConfig
    tables: list
    omega0: NDArray[np.float64]
    c0: NDArray[np.float64]
    mu0: NDArray[np.float64]
    iterations: int
    history: list

    def __post_init__(self):
        self._op = _Operator(self.params, self.autarky, self.tables, self.config)

    # ---------------------------------------------------------------- queries

    @property
    def omega_min(self):
        return self.autarky.omega_min

    @property
    def omega_max(self):
        return self.autarky.omega_max

    def _check_domain(self, s, omega):
        lo = self.omega_min[s] - DOMAIN_TOL
        hi = self.omega_max[s] + DOMAIN_TOL
        if np.any(omega < lo) or np.any(omega > hi):
            raise DomainError("promise outside [omega_min(s), omega_max(s)]")

    def value(self, s: int, omega):
        """Value ``V(s, ω)``."""
        omega = np.asarray(omega, dtype=float)
        self._check_domain(s, omega)
        return self.tables[s].value(omega)

    def value_derivative(self, s: int, omega):
        """``V_ω(s, ω)`` from the Hermite interpolant."""
        omega = np.asarray(omega, dtype=float)
        self._check_domain(s, omega)
        return self.tables[s].dvalue(omega)

    def policy(self, s, omega) -> Policy:
        """Policies at states ``(s[k], ω[k])``; ``s`` may be a scalar."""
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        s = np.broadcast_to(np.asarray(s, dtype=int), omega.shape).copy()
        for k in np.unique(s):
            self._check_domain(k, omega[s == k])
        b, d = self.params.beta, self.params.delta
        om0 = self.omega0[s]
        binding = omega > om0
        om_eff = np.where(binding, np.minimum(omega, self.omega_max[s]), om0)
        t = np.log1p(self.mu0[s])
        if binding.any():
            t[binding] = self._op.node_solve(s[binding], om_eff[binding])
        c = np.where(binding, -np.expm1(om_eff), self.c0[s])
        mu = np.expm1(t)
        lam = np.where(binding, np.maximum(0.0, (d / b) * np.exp(t) * _odds(om_eff) - 1.0), 0.0)
        # ω at the reset level may still carry λ > 0 when the nn constraint binds there
        lam = np.where(~binding & (omega >= om0), self._lam_at_reset()[s], lam)
        prom = np.stack([tab.promise(t) for tab in self.tables], axis=-1)
        lam_lo = np.array([np.expm1(tab.t_lo) for tab in self.tables])
        # the upper bound binds only when the multiplier reaches the cap
        xi = np.where(t[:, None] >= self._op.t_cap, np.maximum(0.0, mu[:, None] - self.config.lam_cap), 0.0)
        xi = np.broadcast_to(xi, prom.shape).copy()
        eta = np.where(t[:, None] <= np.log1p(lam_lo)[None, :], np.maximum(0.0, lam_lo - mu[:, None]), 0.0)
        return Policy(c=c, promises=prom, mu=mu, lam=lam, xi=xi, eta=eta)

    def _lam_at_reset(self):
        return np.array([tab.lam0 for tab in self.tables])

    def policy_eval(self, s: int, omega: float):
        """``(c, promises, μ, λ)`` at a single state."""
        pol = self.policy(s, [omega])
        return float(pol.c[0]), pol.promises[0].copy(), float(pol.mu[0]), float(pol.lam[0])

    def initial_promise(self, s0: int | None = None, target: float | None = None) -> float:
        """``max{ω⁰(s₀), ω̄₀}``; defaults come from the parameters."""
        s0 = self.params.s0 if s0 is None else s0
        target = self.params.initial_target if target is None else target
        if target is None:
            return float(self.omega0[s0])
        if target > self.omega_max[s0]:
            raise InfeasibleTarget("initial target exceeds omega_max(s0)")
        return float(max(self.omega0[s0], target))

    @property
    def omega_c(self) -> NDArray[np.float64]:
        """Largest ω with μ(s, ω) = 0; NaN where μ(s, ω⁰(s)) > 0."""
        g0 = np.sum(self.params.pi * self.omega0)
        with np.errstate(invalid="ignore"):
            oc = np.log(-np.expm1(self.autarky.upsilon_hat - self.params.beta * g0))
        return np.where(self.mu0 > 0.0, np.nan, oc)

    def multiplier_tail_slope(self, n: int = 8) -> NDArray[np.float64]:
        """Slope of ``log(1+λ)`` against ``log(ω_max − ω)`` over the last ``n``
        interior nodes, per state.

        A slope near zero means λ stays bounded as ω → ω_max; a slope near
        ``−1/k`` (see :func:`tail_exponent`) means it diverges.
        """
        out = np.empty(self.params.n_states)
        for s, tab in enumerate(self.tables):
            x, lam = tab.nodes[-1 - n:-1], tab.lam[-1 - n:-1]
            out[s] = np.polyfit(np.log(tab.omega_max - x), np.log1p(lam), 1)[0]
        return out

    @property
    def lambda_max_finite(self) -> NDArray[np.bool_]:
        """Numerical verdict on whether λ(s, ω) stays bounded at ω_max(s)."""
        return self.multiplier_tail_slope() > -0.1

    @property
    def omega_f(self) -> NDArray[np.float64]:
        """Fixed points of ``ω -> g_s(s, ω)``."""
        out = np.empty(self.params.n_states)
        for s in range(out.size):
            f = lambda w: float(self.policy(s, [w]).promises[0, s]) - w
            lo, hi = float(self.omega0[s]), float(self.omega_max[s])
            if f(lo) <= 1e-13:
                out[s] = lo
            elif f(hi) >= 0.0:
                out[s] = hi
            else:
                out[s] = brentq(f, lo, hi, xtol=1e-14)
        return out

    def ladder(self, n: int, start_state: int = 0, repeat_state: int | None = None):
        """Promises after ``k = 0..n`` consecutive draws of ``repeat_state``.

        The path starts from the reset point of ``start_state``.
        """
        r = self.params.n_states - 1 if repeat_state is None else repeat_state
        omega = float(self.omega0[start_state])
        s = start_state
        out = []
        for _ in range(n + 1):
            omega = float(self.policy(s, [omega]).promises[0, r])
            s = r
            out.append(omega)
        return np.array(out)

    def check_grid(self, s: int) -> NDArray[np.float64]:
        return chebyshev_lobatto(self.omega_min[s], self.omega_max[s], self.config.gp)

    # ---------------------------------------------------------------- io

    def to_dict(self) -> dict:
        from .io import params_to_dict

        return {
            "format": "olgins-planner-solution",
            "version": 1,
            "params": params_to_dict(self.params),
            "config": {
                "gp": self.config.gp, "tol": self.config.tol, "max_iters": self.config.max_iters,
                "lam_cap": self.config.lam_cap, "extrapolate": self.config.extrapolate,
                "eval_passes": self.config.eval_passes, "bisect_iters": self.config.bisect_iters,
            },
            "omega0": self.omega0.tolist(), "c0": self.c0.tolist(), "mu0": self.mu0.tolist(),
            "iterations": self.iterations, "history": list(self.history),
            "tables": [t.to_dict() for t in self.tables],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PlannerSolution":
        from .io import params_from_dict

        if doc.get("format") != "olgins-planner-solution" or doc.get("version") != 1:
            raise ValueError("not a version-1 planner solution document")
        params = params_from_dict(doc["params"])
        aut = autarky(params)
        cfg = GridConfig(**doc["config"])
        bd = params.beta / params.delta
        tables = [
            _StateTable(omega0=t["omega0"], lam0=t["lam0"], nodes=np.array(t["nodes"]),
                        V=np.array(t["V"]), lam=np.array(t["lam"]),
                        omega_max=float(aut.omega_max[k]), beta_over_delta=bd,
                        singular_top=bool(t.get("singular_top", False)),
                        tail_rate=float(t.get("tail_rate", 1.0)),
                        omega_c=float("nan") if t.get("omega_c") is None else float(t["omega_c"]))
            for k, t in enumerate(doc["tables"])
        ]
        return cls(params=params, autarky=aut, first_best=first_best(params), config=cfg,
                   tables=tables, omega0=np.array(doc["omega0"]), c0=np.array(doc["c0"]),
                   mu0=np.array(doc["mu0"]), iterations=int(doc["iterations"]),
                   history=list(doc["history"]))


# -------------------------------------------------------------------- solve


def _first_best_tables(params, aut, fb, cfg):
    bd = params.beta / params.delta
    tables = []
    for s in range(params.n_states):
        lo = min(float(fb.omega_star[s]), float(aut.omega_max[s]))
        x = chebyshev_lobatto(lo, float(aut.omega_max[s]), cfg.gp)
        tables.append(_StateTable(omega0=lo, lam0=float(fb.lam(s, lo)), nodes=x,
                                  V=fb.value(s, x), lam=np.minimum(fb.lam(s, x), cfg.lam_cap),
                                  omega_max=float(aut.omega_max[s]), beta_over_delta=bd))
    return tables


def _bellman(params, aut, tables, cfg):
    """Apply the Bellman operator once.

    Returns the new tables, the reset data and, per state, the flow payoff
    and promise matrix at every node so that the same plans can be
    re-evaluated without re-solving the first-order conditions.
    """
    b, d = params.beta, params.delta
    op = _Operator(params, aut, tables, cfg)
    om0, c0, mu0, lam0 = op.reset_levels()
    v_top = _top_value(params, aut)
    # end of the segment above ω⁰(s) where promise keeping binds with μ = 0
    with np.errstate(invalid="ignore"):
        om_c = np.log(-np.expm1(aut.upsilon_hat - b * float(op.G(np.zeros(1))[0])))
    om_c = np.where(mu0 > 0.0, np.nan, om_c)
    new, plans = [], []
    for s in range(params.n_states):
        x = chebyshev_lobatto(float(om0[s]), float(aut.omega_max[s]), cfg.gp)
        t = op.node_solve(np.full(x.size, s), x)
        t[0] = np.log1p(mu0[s])
        cont, prom = op.continuation(t)
        u = (b / d) * x + np.log(-np.expm1(x))
        V = u + d * cont
        lam = np.minimum(np.maximum(0.0, (d / b) * np.exp(t) * _odds(x) - 1.0), cfg.lam_cap)
        lam[0] = lam0[s]
        # at ω_max the feasible set is a single absorbing plan, known exactly;
        # its multiplier is only bounded by the cap
        V[-1] = v_top[s]
        lam[-1] = cfg.lam_cap
        new.append(_StateTable(omega0=float(om0[s]), lam0=float(lam0[s]), nodes=x, V=V, lam=lam,
                               omega_max=float(aut.omega_max[s]), beta_over_delta=b / d,
                               singular_top=True, tail_rate=op.tail_rate,
                               omega_c=float(om_c[s])))
        plans.append((u, prom))
    return new, om0, c0, mu0, plans


def _evaluate(params, tables, plans, passes):
    """Apply the fixed-plan operator ``passes`` times (no re-optimisation)."""
    d, pi = params.delta, params.pi
    for _ in range(passes):
        out = []
        for tab, (u, prom) in zip(tables, plans):
            cont = sum(pi[r] * tables[r].value(prom[:, r]) for r in range(pi.size))
            V = u + d * cont
            V[-1] = tab.V[-1]
            out.append(_StateTable(omega0=tab.omega0, lam0=tab.lam0, nodes=tab.nodes, V=V,
                                   lam=tab.lam, omega_max=tab.omega_max,
                                   beta_over_delta=tab.beta_over_delta,
                                   singular_top=tab.singular_top, tail_rate=tab.tail_rate,
                                   omega_c=tab.omega_c))
        tables = out
    return tables


def _top_value(params, aut):
    """Value of staying at the upper promise bound forever."""
    b, d = params.beta, params.delta
    u = np.log(-np.expm1(aut.omega_max)) + (b / d) * aut.omega_max
    return u + d * np.sum(params.pi * u) / (1.0 - d)


def _shift(tables, c):
    out = []
    for t in tables:
        out.append(_StateTable(omega0=t.omega0, lam0=t.lam0, nodes=t.nodes, V=t.V + c,
                               lam=t.lam, omega_max=t.omega_max,
                               beta_over_delta=t.beta_over_delta,
                               singular_top=t.singular_top, tail_rate=t.tail_rate,
                               omega_c=t.omega_c))
    return out


def _log_multiplier(tab, at=None):
    """``log(1 + λ)`` on the interior nodes, optionally carried to the nodes
    of another table by interpolating in the log distance to ω_max."""
    t = np.log1p(tab.lam[1:-1])
    if at is None:
        return t
    gap = np.log(tab.omega_max - tab.nodes[1:-1])
    return np.interp(np.log(at.omega_max - at.nodes[1:-1]), gap[::-1], t[::-1])


def _extrapolate_multipliers(old, new, prev, r_max=0.8, r_agree=0.05):
    """Geometric extrapolation of ``log(1 + λ)`` where it contracts steadily.

    A node is extrapolated only when the ratio of successive steps is below
    ``r_max`` and agrees with the previous ratio to within ``r_agree``.
    ``prev`` carries the last steps and ratios between calls.
    """
    steps = [_log_multiplier(n) - _log_multiplier(o, at=n) for o, n in zip(old, new)]
    if prev is None:
        return new, (steps, None)
    last_steps, last_ratios = prev
    ratios, out = [], []
    for i, n in enumerate(new):
        dt, dp = steps[i], last_steps[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(np.abs(dp) > 1e-14, dt / dp, 0.0)
            gain = np.where(r < 1.0, r / (1.0 - r), 0.0)
        ratios.append(r)
        if last_ratios is None:
            out.append(n)
            continue
        ok = (r > 0.0) & (r < r_max) & (np.abs(r - last_ratios[i]) < r_agree)
        t = _log_multiplier(n) + np.where(ok, dt * gain, 0.0)
        lam = n.lam.copy()
        lam[1:-1] = np.minimum(np.expm1(t), lam[-1])
        out.append(_StateTable(omega0=n.omega0, lam0=n.lam0, nodes=n.nodes, V=n.V, lam=lam,
                               omega_max=n.omega_max, beta_over_delta=n.beta_over_delta,
                               singular_top=n.singular_top, tail_rate=n.tail_rate,
                               omega_c=n.omega_c))
    return out, (steps, ratios)


def solve(params: EconomyParams, cfg: GridConfig | None = None, *, check=True,
          callback=None) -> PlannerSolution:
    """Solve the planner problem by value-function iteration from V*.

    Parameters
    ----------
    params : EconomyParams
    cfg : GridConfig, optional
    check : bool
        Refuse parameters that fail the maintained assumptions.
    callback : callable, optional
        Called as ``callback(k, tables, grids)`` after every sweep; used to
        inspect intermediate iterates.

    Raises
    ------
    ConvergenceError
        If the sup-norm change stays above ``cfg.tol`` after ``max_iters``.
    """
    cfg = GridConfig() if cfg is None else cfg
    if check:
        rep = validate(params)
        if not rep.passed:
            raise AssumptionViolation("parameters fail the maintained assumptions:\n" + rep.summary())
    aut = autarky(params)
    fb = first_best(params)
    d = params.delta
    grids = [chebyshev_lobatto(aut.omega_min[s], aut.omega_max[s], cfg.gp)
             for s in range(params.n_states)]
    tables = _first_best_tables(params, aut, fb, cfg)
    if callback is not None:
        callback(0, tables, grids)
    history = []
    steps = None
    for k in range(1, cfg.max_iters + 1):
        new, om0, c0, mu0, plans = _bellman(params, aut, tables, cfg)
        new = _evaluate(params, new, plans, cfg.eval_passes)
        if cfg.extrapolate:
            # level drift measured at the regeneration point (1, ω⁰(1))
            m = 1 + cfg.eval_passes
            drift = float(new[0].value(om0[0]) - tables[0].value(om0[0]))
            new = _shift(new, drift * d**m / (1.0 - d**m))
        if cfg.extrapolate:
            new, steps = _extrapolate_multipliers(tables, new, steps)
        diff = max(float(np.max(np.abs(n.value(g) - t.value(g)))) for n, t, g in zip(new, tables, grids))
        history.append(diff)
        tables = new
        if callback is not None:
            callback(k, tables, grids)
        if diff < cfg.tol:
            return PlannerSolution(params=params, autarky=aut, first_best=fb, config=cfg,
                                   tables=tables, omega0=om0, c0=c0, mu0=mu0,
                                   iterations=k, history=history)
    raise ConvergenceError(f"no convergence after {cfg.max_iters} sweeps", history)
