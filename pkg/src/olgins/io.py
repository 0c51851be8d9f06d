"""Serialisation helpers: parameters, solution documents, CSV tables."""

from __future__ import annotations

import csv
import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .core import EconomyParams, make_params


def params_to_dict(p: EconomyParams) -> dict:
    return {
        "shares": p.s.tolist(),
        "probs": p.pi.tolist(),
        "beta": p.beta,
        "delta": p.delta,
        "growth": {"factors": p.growth.factors.tolist(), "probs": p.growth.probs.tolist()},
        "initial_state": p.initial_state,
        "initial_target": p.initial_target,
    }


def params_from_dict(doc: dict) -> EconomyParams:
    g = doc.get("growth") or {}
    return make_params(
        doc["shares"], doc["probs"], doc["beta"], doc["delta"],
        growth=g.get("factors"), growth_probs=g.get("probs"),
        initial_state=int(doc.get("initial_state", 1)),
        initial_target=doc.get("initial_target"),
    )


def save_solution(sol, path) -> None:
    Path(path).write_text(json.dumps(sol.to_dict(), indent=1))


def load_solution(path):
    from .planner import PlannerSolution

    return PlannerSolution.from_dict(json.loads(Path(path).read_text()))


def fmt(x) -> str:
    """Lossless text for a scalar: 17 significant digits for floats."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, header, rows) -> Path:
    """Write rows of scalars with a fixed header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True, default=str).encode()).hexdigest()


def write_manifest(out_dir, stage: str, config: dict, seed, outputs) -> Path:
    """Record what was run and what it produced."""
    import platform

    import scipy

    from . import __version__

    out_dir = Path(out_dir)
    doc = {
        "stage": stage,
        "config": config,
        "config_sha256": config_hash(config),
        "seed": seed,
        "versions": {
            "olgins": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
        },
        "outputs": {os.path.basename(str(p)): file_sha256(p) for p in outputs},
    }
    path = out_dir / f"manifest-{stage}.json"
    path.write_text(json.dumps(doc, indent=1, sort_keys=True))
    return path
