"""Experiment orchestration: specs, parallel replicas, CSV/JSON artifacts.

Every experiment is described by an ExperimentSpec (JSON-serializable, with
a versioned schema and unknown keys rejected) and produces CSV data files
plus a summary JSON carrying a content hash. Replica work is split into
chunks whose sizes and seeds depend only on (spec, master_seed), and chunk
results are reduced in chunk order, so artifacts are byte-identical no
matter how many workers run them.

Floats in CSVs are printed with 17 significant digits so the files
round-trip losslessly and hash stably.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import bp, de, tree
from .errors import ValidationError
from .graph import load_graph, sample_sbm
from .model import ModelParams, derived_constants, validate_params
from .seeds import derive_seed

__all__ = ["SCHEMA_VERSION", "KINDS", "ExperimentSpec", "spec_from_json", "run_experiment"]

SCHEMA_VERSION = 1
KINDS = ("graph_bp", "tree_sim", "de_solve", "de_sweep", "boundary_gap", "compare")

# Stream tags keeping unrelated random draws of one experiment apart.
_TREE_STREAM = 1 << 40
_GRAPH_STREAM = 0


@dataclass
class ExperimentSpec:
    kind: str
    out_dir: str
    master_seed: int = 0
    workers: int = 0  # 0 = one per CPU
    t: int = 1
    replicas: int = 1
    # graph / tree model parameters
    n: int = 0
    a: float | None = None
    b: float | None = None
    alpha: float | None = None
    # density evolution
    mu: float | None = None
    quad_points: int = 61
    tol: float = 1e-12
    mu_grid: list[float] | None = None
    alpha_list: list[float] | None = None
    # compare: Monte Carlo budget for the tree-side estimate
    tree_replicas: int = 10000
    # graph_bp: run on a stored graph instead of sampling one
    graph_dir: str | None = None

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValidationError(f"unknown experiment kind {self.kind!r}")
        if self.replicas < 1:
            raise ValidationError("replicas must be >= 1")
        if self.t < 0:
            raise ValidationError("t must be >= 0")
        if self.workers < 0:
            raise ValidationError("workers must be >= 0")
        if self.kind in ("graph_bp", "tree_sim", "boundary_gap", "compare") and self.graph_dir is None:
            if self.a is None or self.b is None or self.alpha is None:
                raise ValidationError(f"{self.kind} needs a, b, alpha")
        if self.kind in ("de_solve",) and self.mu is None:
            raise ValidationError("de_solve needs mu")
        if self.kind in ("de_solve",) and self.alpha is None:
            raise ValidationError("de_solve needs alpha")
        if self.kind == "de_sweep" and (not self.mu_grid or not self.alpha_list):
            raise ValidationError("de_sweep needs mu_grid and alpha_list")

    def model_params(self) -> ModelParams:
        return validate_params(self.n, self.a, self.b, self.alpha)


def spec_from_json(source) -> ExperimentSpec:
    """Parse a spec from a JSON file path or an already-loaded dict.

    Rejects unknown keys and schema mismatches: a silently ignored typo in
    an experiment config corrupts results far downstream.
    """
    if isinstance(source, (str, Path)):
        data = json.loads(Path(source).read_text())
    else:
        data = dict(source)
    if data.pop("schema", None) != SCHEMA_VERSION:
        raise ValidationError(f"config must carry \"schema\": {SCHEMA_VERSION}")
    allowed = set(ExperimentSpec.__dataclass_fields__)
    unknown = set(data) - allowed
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    if "kind" not in data or "out_dir" not in data:
        raise ValidationError("config needs at least kind and out_dir")
    spec = ExperimentSpec(**data)
    spec.validate()
    return spec


def spec_to_json(spec: ExperimentSpec) -> dict:
    out = {"schema": SCHEMA_VERSION}
    out.update(asdict(spec))
    return out


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(x) for x in row) + "\n")


def _map_ordered(fn, tasks, workers: int):
    """fn over tasks with results in task order; fn/tasks must pickle."""
    if workers == 0:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    m = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return m, se


# ---------------------------------------------------------------------------
# chunk workers (module level so they pickle)

def _tree_chunk(task):
    n, a, b, alpha, depth, count, seed = task
    p = validate_params(n, a, b, alpha)
    return tree.tree_magnetization_samples(p, depth, count, seed)


def _gap_chunk(task):
    n, a, b, alpha, depth, count, seed = task
    p = validate_params(n, a, b, alpha)
    return tree.boundary_gap_samples(p, depth, count, seed)


def _bp_accuracy_task(task):
    n, a, b, alpha, t, seed = task
    p = validate_params(n, a, b, alpha)
    g = sample_sbm(p, seed)
    run = bp.run_bp(g, derived_constants(p), t)
    return bp.empirical_accuracy(run.labels, g.sigma)


def _sweep_row_task(task):
    mu, alpha, quad, tol = task
    rows = de.sweep_curves([mu], [alpha], quad_points=quad, tol=tol)
    return rows[0]


# ---------------------------------------------------------------------------
# experiment bodies; each returns (artifact name -> rows/paths payload)

def _run_tree_sim(spec: ExperimentSpec, out: Path) -> dict:
    p = spec.model_params()
    chunks = tree._chunk_counts(p, spec.t, spec.replicas)
    tasks = [(spec.n, spec.a, spec.b, spec.alpha, spec.t, cnt,
              derive_seed(spec.master_seed, _TREE_STREAM + i)) for i, cnt in enumerate(chunks)]
    parts = _map_ordered(_tree_chunk, tasks, spec.workers)
    x = np.concatenate([part[0] for part in parts])
    y = np.concatenate([part[1] for part in parts])
    pm, pse = _mean_se(0.5 * np.abs(x) + 0.5)
    qm, qse = _mean_se(0.5 * np.abs(y) + 0.5)
    gm, gse = _mean_se(np.abs(x - y))
    rows = [("p_star", spec.t, pm, pse, spec.replicas),
            ("q_star", spec.t, qm, qse, spec.replicas),
            ("gap", spec.t, gm, gse, spec.replicas)]
    _write_csv(out / "metrics.csv", ["metric", "t", "estimate", "std_error", "replicas"], rows)
    return {"metrics": out / "metrics.csv"}


def _run_boundary_gap(spec: ExperimentSpec, out: Path) -> dict:
    p = spec.model_params()
    if spec.t < 1:
        raise ValidationError("boundary_gap needs t >= 1")
    chunks = tree._chunk_counts(p, spec.t, spec.replicas)
    tasks = [(spec.n, spec.a, spec.b, spec.alpha, spec.t, cnt,
              derive_seed(spec.master_seed, _TREE_STREAM + i)) for i, cnt in enumerate(chunks)]
    parts = _map_ordered(_gap_chunk, tasks, spec.workers)
    samples = np.concatenate(parts, axis=0)
    rows = []
    for s in range(spec.t):
        m, se = _mean_se(samples[:, s])
        rows.append(("boundary_gap", s + 1, m, se, spec.replicas))
    _write_csv(out / "metrics.csv", ["metric", "t", "estimate", "std_error", "replicas"], rows)
    return {"metrics": out / "metrics.csv"}


def _run_de_solve(spec: ExperimentSpec, out: Path) -> dict:
    cfg = de.DeConfig(mu=spec.mu, alpha=spec.alpha, quad_points=spec.quad_points, tol=spec.tol)
    res = de.solve(cfg)
    payload = {
        "mu": cfg.mu, "alpha": cfg.alpha,
        "v_low": res.v_low, "v_high": res.v_high,
        "acc_low": res.acc_low, "acc_high": res.acc_high,
        "converged_low": res.converged_low, "converged_high": res.converged_high,
        "trajectory_low": [float(v) for v in res.trajectory_low],
        "trajectory_high": [float(v) for v in res.trajectory_high],
    }
    path = out / "result.json"
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return {"result": path}


def _run_de_sweep(spec: ExperimentSpec, out: Path) -> dict:
    tasks = [(mu, alpha, spec.quad_points, spec.tol)
             for alpha in spec.alpha_list for mu in spec.mu_grid]
    rows = _map_ordered(_sweep_row_task, tasks, spec.workers)
    _write_csv(out / "error_curves.csv", ["mu", "alpha", "error"],
               [(r.mu, r.alpha, r.err_low) for r in rows])
    hp = de.hprime_grid(spec.alpha_list, quad_points=spec.quad_points)
    _write_csv(out / "hprime_curves.csv", ["v", "alpha", "hprime"], hp)
    return {"error_curves": out / "error_curves.csv", "hprime_curves": out / "hprime_curves.csv"}


def _run_graph_bp(spec: ExperimentSpec, out: Path) -> tuple[dict, dict]:
    if spec.graph_dir is not None:
        g, p, _ = load_graph(spec.graph_dir)
    else:
        p = spec.model_params()
        g = sample_sbm(p, derive_seed(spec.master_seed, _GRAPH_STREAM))
    t0 = time.perf_counter()
    run = bp.run_bp(g, derived_constants(p), max(spec.t, 1))
    wall_ms = (time.perf_counter() - t0) * 1e3
    acc = bp.empirical_accuracy(run.labels, g.sigma)
    rows = [(i, g.sigma[i], g.sigma_tilde[i], run.beliefs[i], run.labels[i]) for i in range(g.n)]
    _write_csv(out / "vertices.csv", ["vertex", "sigma", "sigma_tilde", "belief", "label"], rows)
    return ({"vertices": out / "vertices.csv"},
            {"accuracy": acc, "iterations": max(spec.t, 1), "wall_time_ms": wall_ms})


def _run_compare(spec: ExperimentSpec, out: Path) -> dict:
    p = spec.model_params()
    tasks = [(spec.n, spec.a, spec.b, spec.alpha, max(spec.t, 1),
              derive_seed(spec.master_seed, _GRAPH_STREAM + i)) for i in range(spec.replicas)]
    accs = np.asarray(_map_ordered(_bp_accuracy_task, tasks, spec.workers))
    g_mean, g_se = _mean_se(accs)

    chunks = tree._chunk_counts(p, spec.t, spec.tree_replicas)
    ttasks = [(spec.n, spec.a, spec.b, spec.alpha, spec.t, cnt,
               derive_seed(spec.master_seed, _TREE_STREAM + i)) for i, cnt in enumerate(chunks)]
    parts = _map_ordered(_tree_chunk, ttasks, spec.workers)
    x = np.concatenate([part[0] for part in parts])
    y = np.concatenate([part[1] for part in parts])
    pm, pse = _mean_se(0.5 * np.abs(x) + 0.5)
    qm, qse = _mean_se(0.5 * np.abs(y) + 0.5)

    cfg = de.DeConfig(mu=derived_constants(p).mu_hat, alpha=spec.alpha,
                      quad_points=spec.quad_points, tol=spec.tol)
    pred = de.solve(cfg)

    rows = [("graph_bp", g_mean, g_se),
            ("tree_q_star", qm, qse),
            ("tree_p_star", pm, pse),
            ("de_prediction", pred.acc_low, 0.0)]
    _write_csv(out / "compare.csv", ["source", "accuracy", "std_error"], rows)
    return {"compare": out / "compare.csv"}


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def run_experiment(spec: ExperimentSpec) -> dict:
    """Run one experiment; returns the manifest (also written as summary.json).

    Output data bytes depend only on (spec minus workers, master_seed);
    wall-clock fields live in the summary, never in the data artifacts.
    """
    spec.validate()
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    extra = {}
    if spec.kind == "tree_sim":
        artifacts = _run_tree_sim(spec, out)
    elif spec.kind == "boundary_gap":
        artifacts = _run_boundary_gap(spec, out)
    elif spec.kind == "de_solve":
        artifacts = _run_de_solve(spec, out)
    elif spec.kind == "de_sweep":
        artifacts = _run_de_sweep(spec, out)
    elif spec.kind == "graph_bp":
        artifacts, extra = _run_graph_bp(spec, out)
    elif spec.kind == "compare":
        artifacts = _run_compare(spec, out)
    else:  # pragma: no cover - validate() already screens
        raise ValidationError(f"unknown experiment kind {spec.kind!r}")
    wall_ms = (time.perf_counter() - t0) * 1e3
    hashes = {name: _sha256(path) for name, path in sorted(artifacts.items())}
    digest = hashlib.sha256()
    for name, hx in sorted(hashes.items()):
        digest.update(name.encode())
        digest.update(hx.encode())
    manifest = {
        "schema": SCHEMA_VERSION,
        "spec": spec_to_json(spec),
        "artifacts": {name: str(path) for name, path in sorted(artifacts.items())},
        "artifact_hashes": hashes,
        "content_hash": digest.hexdigest(),
        "wall_time_ms": wall_ms,
    }
    if extra:
        manifest["result"] = extra
    (out / "summary.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
