"""Constraint-based skeleton recovery on discretized data.

The reference point for the score-based search: discretize everything to two
states at the column mean, then run the PC adjacency phase with a G-squared
conditional-independence test. Iteration order is fixed (pairs sorted, subsets
in combination order, smaller endpoint's neighborhood first) so the result is
a deterministic function of the dataset and alpha.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import stats

from .dataset import ColumnSchema, Dataset
from .errors import DataValidationError, UsageError
from .graph import Skeleton

DEFAULT_ALPHA = 0.05


def mean_discretize(ds: Dataset) -> Dataset:
    """Binarize continuous columns at their mean: at or below the mean maps to
    1, above it to 2. Binary columns pass through unchanged.
    """
    values = ds.values.copy()
    schema = []
    for k, col in enumerate(ds.schema):
        if not col.is_binary:
            values[:, k] = np.where(values[:, k] <= np.mean(values[:, k]), 1.0, 2.0)
        schema.append(ColumnSchema(col.name, "binary"))
    return Dataset(schema, values)


@dataclass(frozen=True)
class CITestResult:
    """One conditional-independence test.

    dof is at least 1 even when the sample is degenerate; low_power marks
    verdicts from tables too sparse to carry any degree of freedom, which
    callers must not treat as evidence of independence.
    """

    pair: tuple[int, int]
    conditioning_set: tuple[int, ...]
    statistic: float
    dof: int
    p_value: float
    independent: bool
    low_power: bool


def g2_test(
    ds: Dataset, i: int, j: int, cond: tuple[int, ...] = (), alpha: float = DEFAULT_ALPHA
) -> CITestResult:
    """G-squared test of column i against column j given the columns in cond.

    Within each stratum of the conditioning variables the statistic adds
    2 * sum O log(O / E) over the non-empty cells of the 2x2 table, and the
    stratum contributes one degree of freedom only when both of its margins
    have two occupied levels. If no stratum carries a degree of freedom the
    sample cannot speak to the question; the result then reports independence
    with low_power set so callers can refuse to act on it.
    """
    if not (0.0 < alpha < 1.0):
        raise UsageError(f"alpha must be in (0, 1), got {alpha}")
    cond = tuple(int(k) for k in cond)
    cols = (i, j, *cond)
    if len(set(cols)) != len(cols):
        raise UsageError(f"test columns must be distinct, got i={i}, j={j}, cond={cond}")
    for k in cols:
        if not ds.schema[ds.column_index(k)].is_binary:
            raise DataValidationError(
                f"G-squared test needs binary columns; column {k} is continuous"
            )
    xi = (ds.column(i) == 2.0).astype(np.int64)
    xj = (ds.column(j) == 2.0).astype(np.int64)
    code = np.zeros(ds.n_rows, dtype=np.int64)
    for bit, k in enumerate(cond):
        code |= (ds.column(k) == 2.0).astype(np.int64) << bit
    n_strata = 1 << len(cond)
    cells = np.bincount(code * 4 + xi * 2 + xj, minlength=n_strata * 4).reshape(n_strata, 2, 2)

    statistic = 0.0
    dof = 0
    for table in cells:
        total = table.sum()
        if total == 0:
            continue
        rows = table.sum(axis=1)
        colsum = table.sum(axis=0)
        live_rows = int(np.count_nonzero(rows))
        live_cols = int(np.count_nonzero(colsum))
        dof += (live_rows - 1) * (live_cols - 1)
        expected = np.outer(rows, colsum) / total
        occupied = table > 0
        statistic += 2.0 * float(
            np.sum(table[occupied] * np.log(table[occupied] / expected[occupied]))
        )
    if dof == 0:
        return CITestResult((i, j), cond, 0.0, 1, 1.0, True, True)
    p_value = float(stats.chi2.sf(statistic, dof))
    return CITestResult((i, j), cond, float(statistic), dof, p_value, p_value > alpha, False)


def pc_skeleton(ds: Dataset, alpha: float = DEFAULT_ALPHA, max_level: int | None = None) -> Skeleton:
    """Adjacency phase of the PC algorithm on an all-binary dataset.

    Starts complete. At level l each surviving pair (in sorted order) is
    tested against every size-l subset of the smaller endpoint's current
    other neighbors, then of the larger endpoint's; the edge is dropped on
    the first confident independence. Low-power verdicts never remove an
    edge. Removals take effect immediately, shrinking the neighborhoods later
    tests draw from. Stops once no edge has an endpoint with l other
    neighbors.
    """
    p = ds.n_cols
    for k in range(p):
        if not ds.schema[k].is_binary:
            raise DataValidationError(
                "pc_skeleton needs an all-binary dataset; discretize first"
            )
    if max_level is not None and max_level < 0:
        raise UsageError(f"max_level must be non-negative, got {max_level}")
    adjacent: set[tuple[int, int]] = {(a, b) for a in range(p) for b in range(a + 1, p)}
    neighbors: list[set[int]] = [set(range(p)) - {a} for a in range(p)]
    level = 0
    while True:
        if max_level is not None and level > max_level:
            break
        candidates = [
            (a, b) for a, b in sorted(adjacent)
            if len(neighbors[a]) - 1 >= level or len(neighbors[b]) - 1 >= level
        ]
        if not candidates:
            break
        for a, b in candidates:
            removed = False
            for base in (a, b):
                other = b if base == a else a
                pool = sorted(neighbors[base] - {other})
                if len(pool) < level:
                    continue
                for cond in combinations(pool, level):
                    result = g2_test(ds, a, b, cond, alpha)
                    if result.independent and not result.low_power:
                        adjacent.discard((a, b))
                        neighbors[a].discard(b)
                        neighbors[b].discard(a)
                        removed = True
                        break
                if removed:
                    break
        level += 1
    return Skeleton(p, frozenset(adjacent))
