"""Command-line runner.

Usage::

    olgins [--config PATH] [--out DIR] [--seed N] [--threads N] COMMAND

Environment variables ``OLGINS_CONFIG``, ``OLGINS_OUT``, ``OLGINS_SEED`` and
``OLGINS_THREADS`` supply a flag that is not given on the command line.

Configuration (YAML; every section and key optional, unknown keys rejected)::

    economy:
      preset: example1          # example1 | three-state | none
      kappa: 0.6                # example1 only
      eps: 0.1                  # example1 only
      pi: 0.5                   # example1 only
      shares: [0.5, 0.7]        # with preset none
      probs: [0.5, 0.5]         # with preset none
      beta: 0.98675516          # defaults to exp(-1/75)
      delta: 0.98675516         # defaults to exp(-1/75)
      growth: {factors: [1.0], probs: [1.0]}
      initial_state: 1
      initial_target: null
    solver:   {gp: 200, tol: 1.0e-6, max_iters: 500, lam_cap: 1.0e8,
               eval_passes: 20, extrapolate: true, shoot_steps: 20, shoot_tol: 1.0e-10}
    ergodic:  {bins: 1000, tol: 1.0e-8, T: 200, max_depth: 60, max_atoms: 4000}
    debt:     {n_grid: 2000}
    pricing:  {k_max: 10, growth: {factors: [0.8, 1.28], probs: [0.5, 0.5]}}
    shock:    {epsilon: 0.01, horizon: 25, mode: analytic, n_paths: 20000}
    deterministic: {share: null, offset: 1.0e-3}
    comparative:   {points: 5}
    output:   {directory: out, format: csv}

Exit codes: 0 success, 2 invalid configuration or parameters, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
ENV_PREFIX = "OLGINS_"


# --------------------------------------------------------------------------
# configuration


class ConfigError(ValueError):
    """Malformed configuration file."""


@dataclass
class EconomySection:
    preset: str = "example1"
    kappa: float = 0.6
    eps: float = 0.1
    pi: float = 0.5
    shares: list | None = None
    probs: list | None = None
    beta: float | None = None
    delta: float | None = None
    growth: dict | None = None
    initial_state: int = 1
    initial_target: float | None = None


@dataclass
class SolverSection:
    gp: int = 200
    tol: float = 1e-6
    max_iters: int = 500
    lam_cap: float = 1e8
    eval_passes: int = 20
    extrapolate: bool = True
    shoot_steps: int = 20
    shoot_tol: float = 1e-10


@dataclass
class ErgodicSection:
    bins: int = 1000
    tol: float = 1e-8
    T: int = 200
    max_depth: int = 60
    max_atoms: int = 4000


@dataclass
class DebtSection:
    n_grid: int = 2000


@dataclass
class PricingSection:
    k_max: int = 10
    growth: dict = field(default_factory=lambda: {"factors": [0.8, 1.28], "probs": [0.5, 0.5]})


@dataclass
class ShockSection:
    epsilon: float = 0.01
    horizon: int = 25
    mode: str = "analytic"
    n_paths: int = 20_000


@dataclass
class DeterministicSection:
    share: float | None = None
    offset: float = 1e-3


@dataclass
class ComparativeSection:
    points: int = 5


@dataclass
class OutputSection:
    directory: str = "out"
    format: str = "csv"


@dataclass
class RunConfig:
    economy: EconomySection = field(default_factory=EconomySection)
    solver: SolverSection = field(default_factory=SolverSection)
    ergodic: ErgodicSection = field(default_factory=ErgodicSection)
    debt: DebtSection = field(default_factory=DebtSection)
    pricing: PricingSection = field(default_factory=PricingSection)
    shock: ShockSection = field(default_factory=ShockSection)
    deterministic: DeterministicSection = field(default_factory=DeterministicSection)
    comparative: ComparativeSection = field(default_factory=ComparativeSection)
    output: OutputSection = field(default_factory=OutputSection)

    @classmethod
    def from_dict(cls, doc: dict | None) -> RunConfig:
        doc = doc or {}
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a mapping")
        sections = {f.name: f for f in fields(cls)}
        unknown = set(doc) - set(sections)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        kwargs = {}
        for name, f in sections.items():
            sub = doc.get(name) or {}
            if not isinstance(sub, dict):
                raise ConfigError(f"section {name!r} must be a mapping")
            klass = f.default_factory().__class__
            allowed = {g.name for g in fields(klass)}
            bad = set(sub) - allowed
            if bad:
                raise ConfigError(f"unknown keys in {name!r}: {sorted(bad)}")
            kwargs[name] = klass(**sub)
        cfg = cls(**kwargs)
        if cfg.output.format not in ("csv", "json"):
            raise ConfigError("output.format must be csv or json")
        return cfg

    @classmethod
    def load(cls, path) -> RunConfig:
        if path is None:
            return cls()
        try:
            doc = yaml.safe_load(Path(path).read_text())
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return asdict(self)

    def params(self):
        from .core import example1, make_params, three_state

        e = self.economy
        g = e.growth or {}
        if e.preset == "example1":
            p = example1(e.kappa, e.eps, e.pi, e.beta, e.delta)
            shares, probs, b, d = p.s.tolist(), p.pi.tolist(), p.beta, p.delta
        elif e.preset == "three-state":
            p = three_state()
            shares, probs = p.s.tolist(), p.pi.tolist()
            b = p.beta if e.beta is None else e.beta
            d = p.delta if e.delta is None else e.delta
        elif e.preset in ("none", None):
            if e.shares is None or e.probs is None:
                raise ConfigError("economy.shares and economy.probs are required without a preset")
            shares, probs = e.shares, e.probs
            default = math.exp(-1.0 / 75.0)
            b = default if e.beta is None else e.beta
            d = default if e.delta is None else e.delta
        else:
            raise ConfigError(f"unknown preset {e.preset!r}")
        return make_params(shares, probs, b, d, growth=g.get("factors"), growth_probs=g.get("probs"),
                           initial_state=e.initial_state, initial_target=e.initial_target)

    def grid(self):
        from .planner import GridConfig

        s = self.solver
        return GridConfig(gp=s.gp, tol=s.tol, max_iters=s.max_iters, lam_cap=s.lam_cap,
                          extrapolate=s.extrapolate, eval_passes=s.eval_passes)

    def pricing_growth(self):
        from .core import GrowthProcess

        g = self.pricing.growth or {}
        return GrowthProcess(g.get("factors", [1.0]), g.get("probs", [1.0]))


# --------------------------------------------------------------------------
# stage plumbing


class Stage:
    """Output directory, config and seed shared by the subcommands."""

    def __init__(self, cfg: RunConfig, out: Path, seed: int):
        self.cfg = cfg
        self.out = out
        self.seed = seed
        self.params = cfg.params()
        self._sol = None
        self._chain = None
        out.mkdir(parents=True, exist_ok=True)

    def table(self, name, header, rows):
        """Write a table in the configured format."""
        from .io import fmt, write_csv

        if self.cfg.output.format == "csv":
            return write_csv(self.out / f"{name}.csv", header, rows)
        path = self.out / f"{name}.json"
        doc = [dict(zip(header, (fmt(v) for v in row))) for row in rows]
        path.write_text(json.dumps(doc, indent=1))
        return path

    def report(self, name, doc):
        path = self.out / f"{name}.json"
        path.write_text(json.dumps(_plain(doc), indent=1, sort_keys=True))
        return path

    def manifest(self, stage, outputs):
        from .io import write_manifest

        return write_manifest(self.out, stage, self.cfg.to_dict(), self.seed, outputs)

    @property
    def solution(self):
        """Planner solution: loaded from ``solution.json`` when it matches the
        economy and solver settings, solved and saved otherwise."""
        if self._sol is None:
            from .io import load_solution, params_to_dict, save_solution
            from .planner import solve

            path = self.out / "solution.json"
            if path.exists():
                sol = load_solution(path)
                if (params_to_dict(sol.params) == params_to_dict(self.params)
                        and sol.config == self.cfg.grid()):
                    self._sol = sol
            if self._sol is None:
                self._sol = solve(self.params, self.cfg.grid())
                save_solution(self._sol, path)
        return self._sol

    @property
    def chain(self):
        if self._chain is None:
            from .ergodic import atom_chain

            e = self.cfg.ergodic
            self._chain = atom_chain(self.solution, max_depth=e.max_depth, max_atoms=e.max_atoms)
        return self._chain


def _plain(x):
    import numpy as np

    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


# --------------------------------------------------------------------------
# subcommands


def cmd_validate(st: Stage):
    from .core import autarky, validate
    from .errors import InvalidParameters

    rep = validate(st.params)
    doc = {"assumptions": rep.as_dict()}
    print(rep.summary())
    if rep.passed:
        aut = autarky(st.params)
        doc["omega_min"] = aut.omega_min
        doc["omega_max"] = aut.omega_max
        if st.params.n_states == 2:
            from .shooting import check_assumption5

            a5 = check_assumption5(st.params)
            doc["reset_condition"] = a5.as_dict()
            print(f"reset       d_max margin={a5.debt_limit_margin:.6g} "
                  f"reset margin={a5.reset_margin:.6g}  {'pass' if a5.passed else 'FAIL'}")
    outs = [st.report("validation", doc)]
    st.manifest("validate", outs)
    if not rep.passed:
        raise InvalidParameters("maintained assumptions fail")


def cmd_first_best(st: Stage):
    from .benchmarks import first_best

    fb = first_best(st.params)
    rows = [(s + 1, st.params.s[s], fb.c_star[s], fb.omega_star[s], fb.v_star[s], fb.d_star[s],
             st.params.pi[s]) for s in range(st.params.n_states)]
    outs = [st.table("first_best", ("state", "share", "c_star", "omega_star", "v_star", "d_star",
                                    "mass"), rows)]
    bond = fb.bond_revenue(0.0)
    outs.append(st.report("first_best_summary", {"V_bar_star": fb.V_bar_star, "BR_star_0": bond}))
    print(f"c* = {fb.c_star}, d* = {fb.d_star}, BR*(0) = {float(bond):.10f}")
    st.manifest("first-best", outs)


def cmd_deterministic(st: Stage):
    from .benchmarks import deterministic_solve

    dc = st.cfg.deterministic
    share = float(st.params.s[-1]) if dc.share is None else float(dc.share)
    det = deterministic_solve(share, st.params.prefs)
    path, T = det.path(det.omega_max_det - dc.offset)
    outs = [st.table("deterministic_path", ("t", "omega"), enumerate(path))]
    outs.append(st.report("deterministic", {
        "share": share, "c_star": det.c_star, "c_min": det.c_min, "omega_star": det.omega_star,
        "omega_c": det.omega_c, "omega_max": det.omega_max_det, "hitting_time": T,
        "first_best_sustainable": det.first_best_sustainable,
    }))
    print(f"share {share}: c_min = {det.c_min:.10f}, hitting time {T}")
    st.manifest("deterministic", outs)


def cmd_solve(st: Stage):
    import numpy as np

    sol = st.solution
    rows = []
    for s in range(st.params.n_states):
        grid = sol.check_grid(s)
        pol = sol.policy(s, grid)
        V = sol.value(s, grid)
        for k, w in enumerate(grid):
            rows.append((s + 1, w, V[k], pol.c[k], pol.mu[k], *pol.promises[k]))
    head = ("state", "omega", "V", "c", "mu") + tuple(f"g{r + 1}" for r in range(st.params.n_states))
    outs = [st.out / "solution.json", st.table("policy", head, rows)]
    outs.append(st.table("convergence", ("sweep", "sup_diff"), enumerate(sol.history, 1)))
    outs.append(st.report("solve", {
        "iterations": sol.iterations, "omega0": sol.omega0, "c0": sol.c0, "mu0": sol.mu0,
        "omega_max": sol.omega_max, "final_diff": sol.history[-1] if sol.history else None,
        "omega_c": sol.omega_c, "multiplier_tail_slope": sol.multiplier_tail_slope(),
        "lambda_max_finite": sol.lambda_max_finite,
    }))
    print(f"converged in {sol.iterations} sweeps; omega0 = {np.round(sol.omega0, 8)}")
    st.manifest("solve", outs)


def cmd_simulate(st: Stage):
    from .ergodic import regeneration_stats, simulate_path

    path = simulate_path(st.solution, T=st.cfg.ergodic.T, seed=st.seed)
    outs = [st.table("path", path.header, path.rows())]
    reg = regeneration_stats(path, (0, float(st.solution.omega0[0])))
    outs.append(st.report("simulate", {
        "T": len(path), "regenerations": reg.n_blocks + 1 if reg.n_blocks else int(reg.times.size),
        "mean_block": reg.mean_block, "min_young_gain": float(path.young_gain.min()),
    }))
    st.manifest("simulate", outs)


def cmd_invariant(st: Stage):
    import numpy as np

    from .ergodic import invariant

    e = st.cfg.ergodic
    dist = invariant(st.solution, bins=e.bins, tol=e.tol)
    ch = st.chain
    outs = [st.table("invariant", dist.header, dist.rows())]
    order = np.argsort(-ch.mass, kind="stable")
    outs.append(st.table("atoms", ("state", "omega", "d", "mass"),
                         ((ch.state[i] + 1, ch.omega[i], ch.debt[i], ch.mass[i]) for i in order)))
    top = [(int(s) + 1, float(dist.chain.centers[s, k]), float(dist.phi[s, k]))
           for s, k in sorted(dist.atoms, key=lambda a: -dist.phi[a])[:4]]
    outs.append(st.report("invariant_summary", {
        "residual": dist.residual, "iterations": dist.iterations, "top_atoms": top,
        "truncated_mass": ch.truncated_mass, "n_atoms": len(ch),
    }))
    for s, w, m in top[:2]:
        print(f"state {s} omega {w:.6f} mass {m:.6f}")
    st.manifest("invariant", outs)


def cmd_debt(st: Stage):
    from .debt import debt_system
    from .pricing import mrp

    ds = debt_system(st.solution, st.cfg.debt.n_grid)
    outs = [st.table("debt", ds.header(), ds.rows())]
    prem = mrp(st.params, ds.d_grid, ds.b, st.cfg.pricing_growth())
    outs.append(st.table("mrp_grid", prem.header, prem.rows()))
    outs.append(st.report("debt_summary", {
        "d_c": ds.d_c, "d_max": ds.d_max, "d0": ds.d0, "d_star": ds.d_star,
        "d_bal": ds.d_bal, "fixed_points": ds.fixed_points(), "BR0": float(ds.BR[0]),
    }))
    print(f"d_c = {ds.d_c:.8f}, d_max = {ds.d_max:.8f}, d_bal = {ds.d_bal}")
    st.manifest("debt", outs)


def _prices(st):
    from .pricing import asset_prices

    return asset_prices(st.solution, st.chain, st.cfg.pricing.k_max, st.cfg.pricing_growth())


def cmd_yields(st: Stage):
    rep = _prices(st)
    outs = [st.table("yields", rep.yield_header, rep.yield_rows())]
    outs.append(st.report("pricing_summary", {
        "rho": rep.rho, "delta": st.params.delta, "y_inf": rep.y_inf,
        "y_inf_plus": rep.curves.y_inf_plus, "upsilon": rep.upsilon,
        "log_psi_ratio": rep.psi_ratio_log, "spreads": rep.spreads,
    }))
    print(f"rho = {rep.rho:.10f}, y_inf = {rep.y_inf:.10f}, upsilon = {rep.upsilon:.8f}")
    st.manifest("yields", outs)


def cmd_mrp(st: Stage):
    import numpy as np

    rep = _prices(st)
    prem = rep.premium
    order = np.lexsort((prem.d, rep.chain.state))
    rows = [(prem.d[i], prem.mrp_plus[i], prem.mrp[i], prem.alpha[i], prem.mrp_star) for i in order]
    outs = [st.table("mrp", prem.header, rows)]
    print(f"MRP* = {prem.mrp_star:.6f}, alpha in [{prem.alpha.min():.6f}, {prem.alpha.max():.6f}]")
    st.manifest("mrp", outs)


def cmd_welfare(st: Stage):
    from .welfare import welfare_measures

    ch = st.chain
    w = welfare_measures(st.solution, ch)
    rows = [(ch.state[i] + 1, ch.omega[i], ch.debt[i], ch.mass[i], w.iota[i], w.theta[i])
            for i in range(len(ch))]
    outs = [st.table("welfare", ("state", "omega", "d", "mass", "iota", "theta"), rows)]
    outs.append(st.report("welfare_summary", {"mean_iota": w.mean_iota, "mean_theta": w.mean_theta}))
    print(f"E[iota] = {w.mean_iota:.6f}, E[theta] = {w.mean_theta:.6f}")
    st.manifest("welfare", outs)


def cmd_shock(st: Stage):
    from .welfare import demographic_irf

    sc = st.cfg.shock
    irf = demographic_irf(st.solution, sc.epsilon, sc.horizon, st.chain, mode=sc.mode,
                          n_paths=sc.n_paths, seed=st.seed)
    rows = [(t, irf.delta_star[t], irf.c_bar[t], irf.c_base[t], irf.se[t], irf.exact[t])
            for t in range(irf.c_bar.size)]
    outs = [st.table("irf", ("t", "delta_star_c", "c_bar", "c_base", "se", "exact"), rows)]
    outs.append(st.report("shock_summary", {"epsilon": sc.epsilon, "violations": irf.violations}))
    print(f"peak response {irf.delta_star.max():.6%} at t = {int(irf.delta_star.argmax())}")
    st.manifest("shock", outs)


def cmd_shoot(st: Stage):
    import numpy as np

    from .shooting import chi_upsilon, shoot

    sv = st.cfg.solver
    lad = shoot(st.params, N=sv.shoot_steps, tol=sv.shoot_tol)
    outs = [st.table("ladder", lad.header, lad.rows())]
    chi, ups = chi_upsilon(st.params)
    doc = {"nu0": lad.nu0, "nu_inf": lad.nu_inf, "chi": chi, "upsilon": ups,
           "log_nu_last": float(np.log(lad.nu[-1]))}
    sol_path = st.out / "solution.json"
    if sol_path.exists():
        sol = st.solution
        n = min(10, lad.c2.size - 1)
        lad_omega = sol.ladder(n)
        c_vfi = sol.policy(1, lad_omega).c
        doc["max_ladder_vfi_gap"] = float(np.max(np.abs(c_vfi - lad.c2[: n + 1])))
        print(f"max |c_ladder - c_vfi| over n <= {n}: {doc['max_ladder_vfi_gap']:.3e}")
    outs.append(st.report("shoot", doc))
    print(f"nu0 = {lad.nu0:.12f}, nu_inf = {lad.nu_inf:.12f}, upsilon = {ups:.12f}")
    st.manifest("shoot", outs)


def cmd_comparative(st: Stage):
    """Υ, 1 - E[ι] and E[θ] along one-parameter variations of Example 1."""
    import numpy as np

    from .core import example1
    from .ergodic import atom_chain
    from .errors import OlginsError
    from .planner import solve
    from .shooting import chi_upsilon
    from .welfare import welfare_measures

    n = st.cfg.comparative.points
    base = math.exp(-1.0 / 75.0)
    sweeps = {
        "kappa": [("kappa", k, example1(kappa=k)) for k in np.linspace(0.56, 0.64, n)],
        "eps": [("eps", e, example1(eps=e)) for e in np.linspace(0.06, 0.14, n)],
        "beta": [("beta", b, example1(beta=b, delta=b)) for b in np.linspace(0.97, base, n)],
    }
    rows = []
    for name, pts in sweeps.items():
        for _, x, p in pts:
            try:
                ups = chi_upsilon(p)[1]
                sol = solve(p, st.cfg.grid())
                w = welfare_measures(sol, atom_chain(sol))
                rows.append((name, x, ups, 1.0 - w.mean_iota, w.mean_theta))
            except OlginsError:
                rows.append((name, x, float("nan"), float("nan"), float("nan")))
    outs = [st.table("comparative", ("parameter", "value", "upsilon", "one_minus_iota", "theta"), rows)]
    st.manifest("comparative", outs)


COMMANDS = {
    "validate": cmd_validate,
    "first-best": cmd_first_best,
    "deterministic": cmd_deterministic,
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "invariant": cmd_invariant,
    "debt": cmd_debt,
    "yields": cmd_yields,
    "mrp": cmd_mrp,
    "welfare": cmd_welfare,
    "shock": cmd_shock,
    "shoot": cmd_shoot,
}


def cmd_reproduce_all(cfg: RunConfig, out: Path, seed: int):
    """Every table for Example 1 and the three-state economy."""
    ex1 = RunConfig.from_dict(cfg.to_dict())
    ex1.economy = EconomySection(preset="example1")
    st = Stage(ex1, out / "example1", seed)
    for name in ("validate", "first-best", "deterministic", "solve", "shoot", "invariant", "debt",
                 "yields", "mrp", "welfare", "shock"):
        COMMANDS[name](st)
    cmd_comparative(st)
    three = RunConfig.from_dict(cfg.to_dict())
    three.economy = EconomySection(preset="three-state")
    three.ergodic.T = max(three.ergodic.T, 200)
    st3 = Stage(three, out / "three-state", seed)
    for name in ("validate", "solve", "simulate", "invariant", "yields", "mrp", "welfare"):
        COMMANDS[name](st3)


# --------------------------------------------------------------------------
# entry point


def _env(name, value, cast=str):
    if value is not None:
        return value
    raw = os.environ.get(ENV_PREFIX + name)
    return None if raw is None else cast(raw)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="olgins", description=__doc__.split("\n")[0])
    ap.add_argument("--config", help="YAML run configuration")
    ap.add_argument("--out", help="output directory (overrides output.directory)")
    ap.add_argument("--seed", type=int, help="random seed (default 0)")
    ap.add_argument("--threads", type=int, help="BLAS threads")
    ap.add_argument("command", choices=sorted(COMMANDS) + ["reproduce-all"])
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = _env("THREADS", args.threads, int)
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(threads)
    from .errors import InvalidParameters, NumericalError

    try:
        cfg = RunConfig.load(_env("CONFIG", args.config))
        out = Path(_env("OUT", args.out) or cfg.output.directory)
        seed = _env("SEED", args.seed, int)
        seed = 0 if seed is None else seed
        if args.command == "reproduce-all":
            cmd_reproduce_all(cfg, out, seed)
        else:
            COMMANDS[args.command](Stage(cfg, out, seed))
    except (ConfigError, InvalidParameters, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
