"""Score-based structure search over DAGs.

exhaustive_search scores every labeled DAG on the node set and keeps the BIC
maximum; oracle_search scores only the orientations of a given undirected
skeleton. Both exploit score decomposability: each (node, parent set) family
is fitted once, then every candidate graph is a table lookup plus a penalty.
Ties within a fixed tolerance are broken toward fewer edges, then toward the
earlier candidate in enumeration order, so results are deterministic and
independent of how the scan is scheduled across workers.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import islice

import numpy as np

from .dataset import Dataset
from .errors import CapabilityError, InsufficientDataError, UsageError
from .graph import (
    DAG_ENUM_CEILING,
    Dag,
    Skeleton,
    count_dags,
    enumerate_dags,
    enumerate_orientations,
)
from .scoring import LIKELIHOODS, FittedLocal, LocalScoreCache, ScoredDag, bic_penalty

# Scores this close are treated as exact ties.
TIE_TOL = 1e-9

# Orienting a skeleton enumerates up to 2^edges candidates.
ORIENTATION_CEILING = 20


@dataclass(frozen=True)
class SearchReport:
    """Outcome of a structure search.

    runner_up_margin is the BIC gap from the winner to the best candidate
    outside the winning tie group; it is 0.0 when the top score is tied or
    only one candidate exists. wall_time is seconds of elapsed real time.
    """

    best: ScoredDag
    candidates_scored: int
    runner_up_margin: float
    wall_time: float
    n_ties: int
    likelihood: str

    @property
    def dag(self) -> Dag:
        return self.best.dag

    @property
    def bic(self) -> float:
        return self.best.bic


class _Scan:
    """Running maximum with an exact tie pool.

    Keeps every candidate within TIE_TOL of the best seen so far, plus the
    best score known to fall below the pool. Merging scans is lossless: a
    candidate outside every pool is dominated by some scan's `below`.
    """

    def __init__(self):
        self.pool: list[tuple[float, int, int, Dag]] = []  # (bic, index, edges, dag)
        self.best = -np.inf
        self.below = -np.inf
        self.count = 0

    def offer(self, bic: float, index: int, dag: Dag):
        self.count += 1
        if bic > self.best:
            self.best = bic
            keep = []
            for entry in self.pool:
                if entry[0] >= bic - TIE_TOL:
                    keep.append(entry)
                elif entry[0] > self.below:
                    self.below = entry[0]
            self.pool = keep
        if bic >= self.best - TIE_TOL:
            self.pool.append((bic, index, len(dag.edges), dag))
        elif bic > self.below:
            self.below = bic

    def absorb(self, other: "_Scan"):
        self.count += other.count
        self.below = max(self.below, other.below)
        for bic, index, edges, dag in other.pool:
            self.count -= 1  # offer() re-counts
            self.offer(bic, index, dag)

    def resolve(self) -> tuple[Dag, float, int, float]:
        """Winner dag, its bic, tie count, and the runner-up margin."""
        ties = [e for e in self.pool if e[0] >= self.best - TIE_TOL]
        bic, _, _, dag = min(ties, key=lambda e: (e[2], e[1]))
        outside = [e[0] for e in self.pool if e[0] < self.best - TIE_TOL]
        runner_up = max([self.below, *outside]) if (outside or np.isfinite(self.below)) else -np.inf
        margin = 0.0 if len(ties) > 1 or not np.isfinite(runner_up) else float(self.best - runner_up)
        return dag, float(bic), len(ties), margin


def _family_table(ds: Dataset, likelihood: str, neighbors: list[int] | None = None):
    """Fit every admissible (node, parent set) family once.

    Returns per-node dicts mapping a parent bitmask to (loglik, FittedLocal).
    Families with too few rows get -inf score instead of failing, except the
    empty set, whose failure is a real error.
    """
    p = ds.n_cols
    cache = LocalScoreCache(ds, likelihood)
    tables: list[dict[int, tuple[float, FittedLocal | None]]] = []
    for i in range(p):
        pool = neighbors[i] if neighbors is not None else [j for j in range(p) if j != i]
        table: dict[int, tuple[float, FittedLocal | None]] = {}
        for code in range(1 << len(pool)):
            parents = tuple(pool[k] for k in range(len(pool)) if (code >> k) & 1)
            mask = 0
            for j in parents:
                mask |= 1 << j
            try:
                fitted = cache.fit(i, parents)
            except InsufficientDataError:
                if not parents:
                    raise
                table[mask] = (-np.inf, None)
            else:
                table[mask] = (fitted.loglik, fitted)
        tables.append(table)
    return tables


def _parent_masks(dag: Dag) -> list[int]:
    masks = [0] * dag.node_count
    for i, j in dag.edges:
        masks[j] |= 1 << i
    return masks


def _score_from_table(dag: Dag, tables, log_m_half: float) -> float:
    total = 0.0
    dim = dag.node_count + len(dag.edges)
    for i, mask in enumerate(_parent_masks(dag)):
        ll = tables[i][mask][0]
        if not np.isfinite(ll):
            return -np.inf
        total += ll
    return total - log_m_half * dim


def _assemble(dag: Dag, tables, n_rows: int) -> ScoredDag:
    fits = []
    for i, mask in enumerate(_parent_masks(dag)):
        fitted = tables[i][mask][1]
        if fitted is None:
            raise InsufficientDataError(
                "winning structure has an unfittable family", node=i
            )
        fits.append(fitted)
    fits = tuple(fits)
    dim = sum(f.param_count for f in fits)
    bic = float(sum(f.loglik for f in fits)) - bic_penalty(n_rows, dim)
    return ScoredDag(dag=dag, bic=bic, locals=fits)


def _scan_range(p: int, tables, log_m_half: float, start: int, stop: int) -> _Scan:
    scan = _Scan()
    for index, dag in enumerate(islice(enumerate_dags(p), start, stop), start):
        scan.offer(_score_from_table(dag, tables, log_m_half), index, dag)
    return scan


def exhaustive_search(ds: Dataset, likelihood: str = "laplace", workers: int = 1) -> SearchReport:
    """BIC-optimal DAG over all labeled DAGs on the dataset's columns.

    workers > 1 splits the enumeration into contiguous index ranges scanned
    in threads; the merged result is bitwise identical to a serial scan.
    """
    t0 = time.perf_counter()
    if likelihood not in LIKELIHOODS:
        raise UsageError(f"unknown likelihood {likelihood!r}, expected one of {LIKELIHOODS}")
    p = ds.n_cols
    if p > DAG_ENUM_CEILING:
        raise CapabilityError(
            f"exhaustive search over {p} nodes would enumerate {count_dags(p)} DAGs; "
            f"the supported ceiling is {DAG_ENUM_CEILING} nodes",
            nodes=p,
        )
    if workers < 1:
        raise UsageError(f"workers must be positive, got {workers}")
    tables = _family_table(ds, likelihood)
    log_m_half = 0.5 * float(np.log(ds.n_rows))
    total = count_dags(p)
    if workers == 1 or total < 4 * workers:
        scan = _scan_range(p, tables, log_m_half, 0, total)
    else:
        bounds = np.linspace(0, total, workers + 1).astype(int)
        scan = _Scan()
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_scan_range, p, tables, log_m_half, int(a), int(b))
                for a, b in zip(bounds[:-1], bounds[1:])
                if a < b
            ]
            for future in futures:
                scan.absorb(future.result())
    dag, bic, n_ties, margin = scan.resolve()
    if not np.isfinite(bic):
        raise InsufficientDataError("no candidate structure is fittable on this dataset")
    best = _assemble(dag, tables, ds.n_rows)
    return SearchReport(
        best=best,
        candidates_scored=scan.count,
        runner_up_margin=margin,
        wall_time=time.perf_counter() - t0,
        n_ties=n_ties,
        likelihood=likelihood,
    )


def oracle_search(ds: Dataset, skeleton: Skeleton, likelihood: str = "laplace") -> SearchReport:
    """BIC-optimal orientation of a fixed undirected skeleton.

    Candidates are the acyclic orientations of the skeleton's edges, so the
    scan is 2^edges at worst instead of super-exponential in nodes.
    """
    t0 = time.perf_counter()
    if likelihood not in LIKELIHOODS:
        raise UsageError(f"unknown likelihood {likelihood!r}, expected one of {LIKELIHOODS}")
    if skeleton.node_count != ds.n_cols:
        raise UsageError(
            f"skeleton has {skeleton.node_count} nodes but data has {ds.n_cols} columns"
        )
    m = len(skeleton.edges)
    if m > ORIENTATION_CEILING:
        raise CapabilityError(
            f"orienting {m} edges would enumerate up to {1 << m} candidates; "
            f"the supported ceiling is {ORIENTATION_CEILING} edges",
            edges=m,
        )
    neighbors = [sorted(skeleton.neighbors(i)) for i in range(skeleton.node_count)]
    tables = _family_table(ds, likelihood, neighbors)
    log_m_half = 0.5 * float(np.log(ds.n_rows))
    scan = _Scan()
    for index, dag in enumerate(enumerate_orientations(skeleton)):
        scan.offer(_score_from_table(dag, tables, log_m_half), index, dag)
    dag, bic, n_ties, margin = scan.resolve()
    if not np.isfinite(bic):
        raise InsufficientDataError("no orientation of the skeleton is fittable on this dataset")
    best = _assemble(dag, tables, ds.n_rows)
    return SearchReport(
        best=best,
        candidates_scored=scan.count,
        runner_up_margin=margin,
        wall_time=time.perf_counter() - t0,
        n_ties=n_ties,
        likelihood=likelihood,
    )
