"""Local likelihoods and BIC scoring for mixed continuous/binary models.

Each node is scored against a candidate parent set: continuous nodes by least
squares with a non-Gaussian residual likelihood (Laplace by default, a
hyperbolic-secant "logcosh" alternative), binary nodes by logistic regression
fit with damped Newton iterations. The graph score is the sum of local
log-likelihoods minus a BIC penalty of (log M / 2) per parameter, where the
parameter count is one per node plus one per edge. Decomposability is what
makes exhaustive search affordable: every (node, parent set) pair is fitted
once and reused across all graphs that contain it.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import InsufficientDataError, UsageError
from .graph import Dag

LIKELIHOODS = ("laplace", "logcosh")

# Logistic weights are clamped to this magnitude; reaching it marks the fit
# unconverged (the MLE diverges under perfect separation).
WEIGHT_CLAMP = 30.0
NEWTON_TOL = 1e-8
NEWTON_MAX_ITER = 100
# Residual scale estimates are floored here so exact fits keep finite logliks.
SCALE_FLOOR = 1e-12

RIDGE_LAMBDA = 1e-8


def sigmoid(z):
    """Numerically stable logistic function, elementwise."""
    arr = np.asarray(z, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    pos = arr >= 0
    with np.errstate(under="ignore"):
        out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
        ez = np.exp(arr[~pos])
        out[~pos] = ez / (1.0 + ez)
    return float(out[0]) if scalar else out


def log_sigmoid(z):
    """log(sigmoid(z)) without overflow for large |z|."""
    arr = np.asarray(z, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    with np.errstate(under="ignore"):
        out = np.minimum(arr, 0.0) - np.log1p(np.exp(-np.abs(arr)))
    return float(out[0]) if scalar else out


def _log_cosh(t: np.ndarray) -> np.ndarray:
    # log cosh(t) = |t| + log1p(exp(-2|t|)) - log 2, stable for large |t|
    a = np.abs(t)
    with np.errstate(under="ignore"):
        return a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0)


@dataclass(frozen=True)
class FittedLocal:
    """One node's fitted mechanism given a parent set.

    coefficients align with sorted(parents); residual_scale is None for
    binary nodes. param_count is the node's contribution to the model
    dimension: one for itself plus one per parent.
    """

    node: int
    kind: str
    parents: tuple[int, ...]
    intercept: float
    coefficients: np.ndarray
    residual_scale: float | None
    loglik: float
    param_count: int
    converged: bool

    def linear_predictor(self, values: np.ndarray) -> np.ndarray:
        """intercept + coefficients . parent columns of a raw value matrix."""
        z = np.full(values.shape[0], self.intercept)
        for w, j in zip(self.coefficients, self.parents):
            z = z + w * values[:, j]
        return z


def _design(ds: Dataset, node: int, parents: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    m = ds.n_rows
    x = np.empty((m, len(parents) + 1))
    x[:, 0] = 1.0
    for k, j in enumerate(parents):
        x[:, k + 1] = ds.values[:, j]
    return x, ds.values[:, node]


def _check_family(ds: Dataset, node: int, parents) -> tuple[int, ...]:
    p = ds.n_cols
    if not (0 <= node < p):
        raise UsageError(f"node {node} out of range for {p} columns")
    parents = tuple(sorted(int(j) for j in parents))
    for j in parents:
        if not (0 <= j < p):
            raise UsageError(f"parent {j} out of range for {p} columns")
    if node in parents:
        raise UsageError(f"node {node} cannot be its own parent")
    if len(set(parents)) != len(parents):
        raise UsageError(f"duplicate parents {parents}")
    # One residual degree of freedom beyond the coefficient count.
    if ds.n_rows < len(parents) + 2:
        raise InsufficientDataError(
            f"{ds.n_rows} rows cannot support {len(parents)} parents plus an intercept",
            node=node,
            parents=list(parents),
        )
    return parents


def _ols(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least squares via QR; falls back to a small ridge when the design is
    rank deficient (duplicate or constant parents), so fitting never fails.
    """
    q, r = np.linalg.qr(x)
    diag = np.abs(np.diag(r))
    tol = max(x.shape) * np.finfo(np.float64).eps * (diag.max() if diag.size else 0.0)
    if diag.size and diag.min() > tol:
        return np.linalg.solve(r, q.T @ y)
    gram = x.T @ x + RIDGE_LAMBDA * np.eye(x.shape[1])
    return np.linalg.solve(gram, x.T @ y)


def residual_loglik(residuals: np.ndarray, likelihood: str) -> tuple[float, float]:
    """Maximized log-likelihood of residuals under the noise model.

    Returns (loglik, scale). Laplace: scale is the mean absolute residual and
    each sample contributes -log(2 scale) - |r|/scale. logcosh: a hyperbolic
    secant density whose scale is the root mean square residual.
    """
    if likelihood not in LIKELIHOODS:
        raise UsageError(f"unknown likelihood {likelihood!r}, expected one of {LIKELIHOODS}")
    r = np.asarray(residuals, dtype=np.float64)
    m = r.shape[0]
    if likelihood == "laplace":
        scale = max(float(np.mean(np.abs(r))), SCALE_FLOOR)
        ll = float(np.sum(-np.log(2.0 * scale) - np.abs(r) / scale))
        return ll, scale
    scale = max(float(np.sqrt(np.mean(r * r))), SCALE_FLOOR)
    t = (np.pi / 2.0) * r / scale
    ll = float(np.sum(-_log_cosh(t)) - m * np.log(2.0 * scale))
    return ll, scale


def fit_continuous(
    ds: Dataset, node: int, parents, likelihood: str = "laplace"
) -> FittedLocal:
    """Least-squares fit of a continuous node on its parents, scored under
    the non-Gaussian residual likelihood. Raw parent values enter the design
    as stored (binary parents contribute their 1/2 codes uncentered).
    """
    parents = _check_family(ds, node, parents)
    if ds.schema[node].kind != "continuous":
        raise UsageError(f"column {ds.schema[node].name} is not continuous")
    x, y = _design(ds, node, parents)
    beta = _ols(x, y)
    residuals = y - x @ beta
    ll, scale = residual_loglik(residuals, likelihood)
    return FittedLocal(
        node=node,
        kind="continuous",
        parents=parents,
        intercept=float(beta[0]),
        coefficients=beta[1:].copy(),
        residual_scale=scale,
        loglik=ll,
        param_count=len(parents) + 1,
        converged=True,
    )


def _bernoulli_loglik(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    z = x @ w
    return float(np.sum(y * log_sigmoid(z) + (1.0 - y) * log_sigmoid(-z)))


def _newton_logistic(
    x: np.ndarray, y: np.ndarray, trace: list | None = None
) -> tuple[np.ndarray, float, bool]:
    """Damped Newton ascent of the Bernoulli log-likelihood.

    Step halving only accepts iterates that do not lose more than float
    resolution of the current objective, so the traced loglik sequence is
    non-decreasing. Weights are clamped to +-WEIGHT_CLAMP; a fit that ends on
    the clamp is reported unconverged (separation pushes the MLE to infinity).
    """
    k = x.shape[1]
    w = np.zeros(k)
    ll = _bernoulli_loglik(x, y, w)
    if trace is not None:
        trace.append(ll)
    converged = False
    for _ in range(NEWTON_MAX_ITER):
        prob = sigmoid(x @ w)
        grad = x.T @ (y - prob)
        if np.max(np.abs(grad)) < NEWTON_TOL:
            converged = True
            break
        weights = prob * (1.0 - prob)
        hess = x.T @ (x * weights[:, None])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.solve(hess + RIDGE_LAMBDA * np.eye(k), grad)
        floor = ll - 1e-10 * (1.0 + abs(ll))
        accepted = False
        shrink = 1.0
        for _ in range(40):
            cand = np.clip(w + shrink * step, -WEIGHT_CLAMP, WEIGHT_CLAMP)
            cand_ll = _bernoulli_loglik(x, y, cand)
            if cand_ll >= floor:
                accepted = True
                break
            shrink *= 0.5
        if not accepted or np.array_equal(cand, w):
            break
        w, ll = cand, cand_ll
        if trace is not None:
            trace.append(ll)
    if np.any(np.abs(w) >= WEIGHT_CLAMP - 1e-9):
        converged = False
    return w, ll, converged


def fit_binary(ds: Dataset, node: int, parents, trace: list | None = None) -> FittedLocal:
    """Logistic fit of a binary node on its parents: P(state 1) is the
    sigmoid of the linear predictor over raw parent values. Perfect
    separation yields a capped-coefficient fit flagged unconverged rather
    than an error. If trace is a list, the accepted per-iteration
    log-likelihoods are appended to it.
    """
    parents = _check_family(ds, node, parents)
    if ds.schema[node].kind != "binary":
        raise UsageError(f"column {ds.schema[node].name} is not binary")
    x, raw = _design(ds, node, parents)
    y = np.where(raw == 1.0, 1.0, 0.0)
    w, ll, converged = _newton_logistic(x, y, trace)
    return FittedLocal(
        node=node,
        kind="binary",
        parents=parents,
        intercept=float(w[0]),
        coefficients=w[1:].copy(),
        residual_scale=None,
        loglik=ll,
        param_count=len(parents) + 1,
        converged=converged,
    )


def fit_local(ds: Dataset, node: int, parents, likelihood: str = "laplace") -> FittedLocal:
    """Dispatch on the node's schema kind."""
    if ds.schema[node].kind == "continuous":
        return fit_continuous(ds, node, parents, likelihood)
    return fit_binary(ds, node, parents)


@dataclass(frozen=True)
class ScoredDag:
    """A DAG with its BIC score and the per-node fits behind it."""

    dag: Dag
    bic: float
    locals: tuple[FittedLocal, ...]

    @property
    def loglik(self) -> float:
        return float(sum(f.loglik for f in self.locals))

    @property
    def dim(self) -> int:
        return int(sum(f.param_count for f in self.locals))

    @property
    def all_converged(self) -> bool:
        return all(f.converged for f in self.locals)


def bic_penalty(n_rows: int, dim: int) -> float:
    return 0.5 * np.log(n_rows) * dim


class LocalScoreCache:
    """Memo for (node, parent set) fits on one dataset and likelihood.

    Thread-safe; scoring many graphs on the same data touches each family
    once no matter how the search is scheduled.
    """

    def __init__(self, ds: Dataset, likelihood: str = "laplace"):
        if likelihood not in LIKELIHOODS:
            raise UsageError(f"unknown likelihood {likelihood!r}, expected one of {LIKELIHOODS}")
        self.ds = ds
        self.likelihood = likelihood
        self._lock = threading.Lock()
        self._fits: dict[tuple[int, tuple[int, ...]], FittedLocal] = {}

    def __len__(self) -> int:
        return len(self._fits)

    def fit(self, node: int, parents) -> FittedLocal:
        key = (node, tuple(sorted(int(j) for j in parents)))
        with self._lock:
            hit = self._fits.get(key)
        if hit is not None:
            return hit
        fitted = fit_local(self.ds, node, key[1], self.likelihood)
        with self._lock:
            return self._fits.setdefault(key, fitted)


def bic_score(
    ds: Dataset,
    dag: Dag,
    likelihood: str = "laplace",
    cache: LocalScoreCache | None = None,
) -> ScoredDag:
    """Score a DAG on a dataset: sum of local log-likelihoods minus
    (log M / 2) times the model dimension (one parameter per node plus one
    per edge).
    """
    if dag.node_count != ds.n_cols:
        raise UsageError(f"graph has {dag.node_count} nodes but data has {ds.n_cols} columns")
    if cache is not None and (cache.ds is not ds or cache.likelihood != likelihood):
        raise UsageError("cache was built for a different dataset or likelihood")
    if cache is None:
        cache = LocalScoreCache(ds, likelihood)
    fits = tuple(cache.fit(i, dag.parents(i)) for i in range(dag.node_count))
    loglik = float(sum(f.loglik for f in fits))
    dim = int(sum(f.param_count for f in fits))
    bic = loglik - bic_penalty(ds.n_rows, dim)
    return ScoredDag(dag=dag, bic=bic, locals=fits)
