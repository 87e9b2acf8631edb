"""Replicated recovery experiments comparing search methods.

One experiment fixes a node count p, a continuous-variable count c, and an
edge probability, then repeatedly draws a random model, samples nested
datasets at each requested size (smaller sizes are prefixes of the largest,
so sample-size effects are not confounded with model draws), and runs each
method. Every replicate is addressed by (seed, replicate, stream), so runs
are bit-reproducible across worker counts and any single replicate can be
regenerated alone. Per-replicate failures are recorded, not fatal.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baseline import mean_discretize, pc_skeleton
from .dataset import Dataset
from .errors import CapabilityError, DataValidationError, UsageError
from .graph import (
    DAG_ENUM_CEILING,
    Dag,
    Skeleton,
    skeleton_of,
    skeletons_equal,
    structures_equal,
)
from .scoring import LIKELIHOODS
from .search import exhaustive_search, oracle_search
from .synth import NOISE_FAMILIES, NoiseSpec, derive_rng, propagate, random_dag, random_model

METHODS = ("hybrid", "hybrid_oracle", "pc_baseline")

# Methods whose estimate is a directed graph rather than just a skeleton.
ORIENTING_METHODS = ("hybrid", "hybrid_oracle")


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one experiment grid.

    c is the number of continuous variables per drawn model (the remaining
    p - c are binary). Defaults reproduce a desk-scale run of the standard
    recovery study.
    """

    p: int = 4
    c: int = 2
    edge_prob: float = 0.5
    sample_sizes: tuple[int, ...] = (100, 1000, 10000, 30000)
    replicates: int = 30
    seed: int = 0
    methods: tuple[str, ...] = METHODS
    alpha: float = 0.05
    weight_low: float = 0.5
    weight_high: float = 1.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    likelihood: str = "laplace"

    def __post_init__(self):
        if not (isinstance(self.p, int) and self.p >= 1):
            raise UsageError(f"p must be a positive integer, got {self.p!r}")
        if not (isinstance(self.c, int) and 0 <= self.c <= self.p):
            raise UsageError(f"c must be an integer in [0, {self.p}], got {self.c!r}")
        if not (0.0 <= self.edge_prob <= 1.0):
            raise UsageError(f"edge_prob must be in [0, 1], got {self.edge_prob}")
        sizes = tuple(int(n) for n in self.sample_sizes)
        if not sizes or any(n < 1 for n in sizes):
            raise UsageError(f"sample_sizes must be positive, got {self.sample_sizes}")
        if len(set(sizes)) != len(sizes) or list(sizes) != sorted(sizes):
            raise UsageError(f"sample_sizes must be strictly increasing, got {self.sample_sizes}")
        object.__setattr__(self, "sample_sizes", sizes)
        if not (isinstance(self.replicates, int) and self.replicates >= 1):
            raise UsageError(f"replicates must be a positive integer, got {self.replicates!r}")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise UsageError(f"seed must be a non-negative integer, got {self.seed!r}")
        methods = tuple(self.methods)
        if not methods or len(set(methods)) != len(methods):
            raise UsageError(f"methods must be non-empty and unique, got {self.methods}")
        for m in methods:
            if m not in METHODS:
                raise UsageError(f"unknown method {m!r}, expected a subset of {METHODS}")
        object.__setattr__(self, "methods", methods)
        if not (0.0 < self.alpha < 1.0):
            raise UsageError(f"alpha must be in (0, 1), got {self.alpha}")
        if not (0 < self.weight_low <= self.weight_high):
            raise UsageError(
                f"need 0 < weight_low <= weight_high, got [{self.weight_low}, {self.weight_high}]"
            )
        if not isinstance(self.noise, NoiseSpec):
            raise UsageError(f"noise must be a NoiseSpec, got {type(self.noise).__name__}")
        if self.likelihood not in LIKELIHOODS:
            raise UsageError(
                f"unknown likelihood {self.likelihood!r}, expected one of {LIKELIHOODS}"
            )
        if "hybrid" in methods and self.p > DAG_ENUM_CEILING:
            raise CapabilityError(
                f"the hybrid method enumerates all DAGs and supports at most "
                f"p={DAG_ENUM_CEILING}; got p={self.p}",
                nodes=self.p,
            )


_CONFIG_KEYS = (
    "p", "c", "edge_prob", "sample_sizes", "replicates", "seed",
    "methods", "alpha", "weight_low", "weight_high", "noise", "likelihood",
)


def config_to_json(config: ExperimentConfig) -> dict:
    return {
        "p": config.p,
        "c": config.c,
        "edge_prob": config.edge_prob,
        "sample_sizes": list(config.sample_sizes),
        "replicates": config.replicates,
        "seed": config.seed,
        "methods": list(config.methods),
        "alpha": config.alpha,
        "weight_low": config.weight_low,
        "weight_high": config.weight_high,
        "noise": {"family": config.noise.family, "scale": config.noise.scale},
        "likelihood": config.likelihood,
    }


def config_from_json(obj: dict) -> ExperimentConfig:
    """Build a config from a JSON object whose keys mirror the field names.

    Every field is optional; unknown keys are rejected so typos cannot
    silently fall back to defaults.
    """
    if not isinstance(obj, dict):
        raise DataValidationError("experiment config must be a JSON object")
    unknown = sorted(set(obj) - set(_CONFIG_KEYS))
    if unknown:
        raise DataValidationError(
            f"unknown config keys {unknown}; valid keys are {list(_CONFIG_KEYS)}"
        )
    kwargs = dict(obj)
    if "sample_sizes" in kwargs:
        kwargs["sample_sizes"] = tuple(kwargs["sample_sizes"])
    if "methods" in kwargs:
        kwargs["methods"] = tuple(kwargs["methods"])
    if "noise" in kwargs:
        spec = kwargs["noise"]
        if not isinstance(spec, dict) or set(spec) - {"family", "scale"}:
            raise DataValidationError(
                'config "noise" must be an object with keys "family" and/or "scale"'
            )
        if "family" in spec and spec["family"] not in NOISE_FAMILIES:
            raise DataValidationError(
                f"unknown noise family {spec['family']!r}, expected one of {NOISE_FAMILIES}"
            )
        kwargs["noise"] = NoiseSpec(**spec)
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise DataValidationError(f"invalid experiment config: {exc}") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataValidationError(f"config file {path} is not valid JSON: {exc}") from exc
    return config_from_json(obj)


@dataclass(frozen=True)
class ReplicateOutcome:
    """One method evaluated on one dataset size within a replicate.

    estimate_edges holds directed (parent, child) pairs for orienting
    methods and undirected (min, max) pairs for the skeleton-only baseline;
    dag_match is None where direction recovery is undefined. A non-None
    error means the method failed on this dataset and the match fields are
    meaningless.
    """

    method: str
    n: int
    estimate_edges: tuple[tuple[int, int], ...]
    dag_match: bool | None
    skeleton_match: bool
    wall_time: float
    error: str | None = None


@dataclass(frozen=True)
class ReplicateRecord:
    """Everything one replicate produced: the drawn truth, a digest of each
    sampled dataset, and each method's outcome on each size.
    """

    replicate: int
    true_edges: tuple[tuple[int, int], ...]
    kinds: tuple[str, ...]
    data_digests: tuple[tuple[int, str], ...]
    outcomes: tuple[ReplicateOutcome, ...]
    error: str | None = None


@dataclass(frozen=True)
class CellStats:
    """Aggregates for one (method, n) cell.

    Accuracies are the fraction of non-failed replicates whose estimate
    matched the truth exactly; dag_accuracy is None for skeleton-only
    methods. skeleton_f1 is the mean per-edge F1 of the estimated skeleton
    against the true one, a gentler companion to the coarse exact-match
    rate. n_failed counts replicates excluded by per-replicate errors.
    """

    method: str
    n: int
    n_replicates: int
    n_failed: int
    dag_accuracy: float | None
    skeleton_accuracy: float | None
    skeleton_f1: float | None
    mean_wall_time: float


@dataclass(frozen=True)
class BenchResults:
    config: ExperimentConfig
    records: tuple[ReplicateRecord, ...]
    cells: tuple[CellStats, ...]

    def cell(self, method: str, n: int) -> CellStats:
        for cell in self.cells:
            if cell.method == method and cell.n == n:
                return cell
        raise UsageError(f"no cell for method={method!r}, n={n}")


def _digest(values: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(values).tobytes()).hexdigest()


def run_replicate(config: ExperimentConfig, r: int) -> ReplicateRecord:
    """Draw model r, sample its nested datasets, and run every method.

    Stream 0 of (seed, r) drives the model draw (graph, then kinds and
    weights), stream 1 the data, so the model is identical no matter which
    sample sizes are requested.
    """
    if not (0 <= r < config.replicates):
        raise UsageError(f"replicate index {r} out of range for {config.replicates}")
    model_rng = derive_rng(config.seed, r, 0)
    dag = random_dag(config.p, config.edge_prob, model_rng)
    model = random_model(
        dag, config.c, model_rng, config.weight_low, config.weight_high, config.noise
    )
    truth_skeleton = skeleton_of(dag)

    n_max = config.sample_sizes[-1]
    data_rng = derive_rng(config.seed, r, 1)
    cont = model.continuous_indices()
    noise = np.empty((n_max, len(cont)))
    for k, node in enumerate(cont):
        noise[:, k] = model.noise_for(node).draw(data_rng, n_max)
    uniforms = data_rng.random((n_max, len(model.binary_indices())))
    full = propagate(model, noise, uniforms)

    digests = []
    outcomes = []
    for n in config.sample_sizes:
        ds = Dataset(model.schema(), full[:n])
        digests.append((n, _digest(ds.values)))
        for method in config.methods:
            t0 = time.perf_counter()
            try:
                if method == "pc_baseline":
                    est_skel = pc_skeleton(mean_discretize(ds), config.alpha)
                    outcomes.append(ReplicateOutcome(
                        method=method,
                        n=n,
                        estimate_edges=tuple(sorted(est_skel.edges)),
                        dag_match=None,
                        skeleton_match=skeletons_equal(est_skel, truth_skeleton),
                        wall_time=time.perf_counter() - t0,
                    ))
                else:
                    if method == "hybrid":
                        report = exhaustive_search(ds, config.likelihood)
                    else:
                        report = oracle_search(ds, truth_skeleton, config.likelihood)
                    est = report.dag
                    outcomes.append(ReplicateOutcome(
                        method=method,
                        n=n,
                        estimate_edges=tuple(sorted(est.edges)),
                        dag_match=structures_equal(est, dag),
                        skeleton_match=skeletons_equal(skeleton_of(est), truth_skeleton),
                        wall_time=time.perf_counter() - t0,
                    ))
            except Exception as exc:  # recorded, never fatal to the run
                outcomes.append(ReplicateOutcome(
                    method=method,
                    n=n,
                    estimate_edges=(),
                    dag_match=None,
                    skeleton_match=False,
                    wall_time=time.perf_counter() - t0,
                    error=f"{type(exc).__name__}: {exc}",
                ))
    return ReplicateRecord(
        replicate=r,
        true_edges=tuple(sorted(dag.edges)),
        kinds=model.kinds,
        data_digests=tuple(digests),
        outcomes=tuple(outcomes),
    )


def _safe_replicate(config: ExperimentConfig, r: int) -> ReplicateRecord:
    try:
        return run_replicate(config, r)
    except Exception as exc:
        return ReplicateRecord(
            replicate=r,
            true_edges=(),
            kinds=(),
            data_digests=(),
            outcomes=(),
            error=f"{type(exc).__name__}: {exc}",
        )


def _undirected(edges) -> set[tuple[int, int]]:
    return {(min(i, j), max(i, j)) for i, j in edges}


def _skeleton_f1(estimate, truth) -> float:
    tp = len(estimate & truth)
    denom = 2 * tp + len(estimate - truth) + len(truth - estimate)
    return 1.0 if denom == 0 else 2.0 * tp / denom


def _aggregate(config: ExperimentConfig, records: tuple[ReplicateRecord, ...]) -> tuple[CellStats, ...]:
    cells = []
    for method in config.methods:
        for n in config.sample_sizes:
            good = [
                (o, rec)
                for rec in records if rec.error is None
                for o in rec.outcomes
                if o.method == method and o.n == n and o.error is None
            ]
            n_failed = config.replicates - len(good)
            if good:
                skel_acc = float(np.mean([o.skeleton_match for o, _ in good]))
                dag_acc = (
                    float(np.mean([o.dag_match for o, _ in good]))
                    if method in ORIENTING_METHODS
                    else None
                )
                f1 = float(np.mean([
                    _skeleton_f1(_undirected(o.estimate_edges), _undirected(rec.true_edges))
                    for o, rec in good
                ]))
                mean_wall = float(np.mean([o.wall_time for o, _ in good]))
            else:
                skel_acc, dag_acc, f1, mean_wall = None, None, None, 0.0
            cells.append(CellStats(
                method=method,
                n=n,
                n_replicates=len(good),
                n_failed=n_failed,
                dag_accuracy=dag_acc,
                skeleton_accuracy=skel_acc,
                skeleton_f1=f1,
                mean_wall_time=mean_wall,
            ))
    return tuple(cells)


def run_experiment(config: ExperimentConfig, workers: int = 1, progress=None) -> BenchResults:
    """Run every replicate and aggregate per-(method, n) accuracies.

    workers > 1 distributes replicates across processes; records are merged
    in replicate order, so results are identical for any worker count. If
    given, progress(done, total) is called in the parent as replicates
    finish.
    """
    if workers < 1:
        raise UsageError(f"workers must be positive, got {workers}")
    total = config.replicates
    if workers == 1:
        records = []
        for r in range(total):
            records.append(_safe_replicate(config, r))
            if progress is not None:
                progress(r + 1, total)
    else:
        records = [None] * total
        done = 0
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_safe_replicate, config, r): r for r in range(total)}
            for future in as_completed(futures):
                records[futures[future]] = future.result()
                done += 1
                if progress is not None:
                    progress(done, total)
    records = tuple(records)
    return BenchResults(config=config, records=records, cells=_aggregate(config, records))


# --- output ------------------------------------------------------------------


def results_to_json(results: BenchResults) -> dict:
    return {
        "config": config_to_json(results.config),
        "cells": [
            {
                "method": c.method,
                "c": results.config.c,
                "n": c.n,
                "n_replicates": c.n_replicates,
                "n_failed": c.n_failed,
                "dag_accuracy": c.dag_accuracy,
                "skeleton_accuracy": c.skeleton_accuracy,
                "skeleton_f1": c.skeleton_f1,
                "mean_wall_time": c.mean_wall_time,
            }
            for c in results.cells
        ],
        "replicates": [
            {
                "replicate": rec.replicate,
                "true_edges": [list(e) for e in rec.true_edges],
                "kinds": list(rec.kinds),
                "data_sha256": {str(n): d for n, d in rec.data_digests},
                "error": rec.error,
                "outcomes": [
                    {
                        "method": o.method,
                        "n": o.n,
                        "estimate_edges": [list(e) for e in o.estimate_edges],
                        "dag_match": o.dag_match,
                        "skeleton_match": o.skeleton_match,
                        "wall_time": o.wall_time,
                        "error": o.error,
                    }
                    for o in rec.outcomes
                ],
            }
            for rec in results.records
        ],
    }


def results_to_csv(results: BenchResults) -> str:
    """Tidy accuracy table: method, c, n, metric, value.

    Orienting methods emit dag_accuracy, skeleton_accuracy, and skeleton_f1
    rows; the skeleton-only baseline emits the latter two. Values carry six
    significant digits.
    """
    lines = ["method,c,n,metric,value"]
    for cell in results.cells:
        pairs = []
        if cell.dag_accuracy is not None:
            pairs.append(("dag_accuracy", cell.dag_accuracy))
        if cell.skeleton_accuracy is not None:
            pairs.append(("skeleton_accuracy", cell.skeleton_accuracy))
        if cell.skeleton_f1 is not None:
            pairs.append(("skeleton_f1", cell.skeleton_f1))
        for metric, value in pairs:
            lines.append(f"{cell.method},{results.config.c},{cell.n},{metric},{value:.6g}")
    return "\n".join(lines) + "\n"


def emit_results(results: BenchResults, out_dir: str | Path, stem: str = "results") -> dict[str, Path]:
    """Write {stem}.csv and {stem}.json into out_dir; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    json_path = out / f"{stem}.json"
    csv_path.write_text(results_to_csv(results), encoding="utf-8")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(results_to_json(results), fh, indent=2)
        fh.write("\n")
    return {"csv": csv_path, "json": json_path}
