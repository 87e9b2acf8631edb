"""Synthetic generators for mixed continuous/binary causal models.

A generative model binds a DAG to per-node mechanisms: continuous nodes are
linear in their parents plus independent non-Gaussian noise, binary nodes draw
state 1 with probability sigmoid(intercept + weighted parents) and state 2
otherwise. Randomness flows through counter-based generators derived from
(seed, stream...) tuples, so any replicate can be regenerated in isolation and
parallel order never changes the data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import ColumnSchema, Dataset
from .errors import DataValidationError, UsageError
from .graph import Dag, default_names, topological_order
from .scoring import sigmoid

NOISE_FAMILIES = ("laplace", "uniform")


def derive_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for a (seed, stream...) address.

    Philox is counter-based: generators for different addresses are
    statistically independent and cost nothing to skip to, which is what lets
    replicates run in any order or in parallel without changing their draws.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, *stream))))


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise family for continuous nodes.

    "laplace" is the default double-exponential with the given scale;
    "uniform" draws from [-scale, scale] as a deliberately mismatched
    alternative for robustness checks.
    """

    family: str = "laplace"
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise UsageError(f"unknown noise family {self.family!r}, expected one of {NOISE_FAMILIES}")
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise UsageError(f"noise scale must be positive and finite, got {self.scale}")

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == "laplace":
            return rng.laplace(0.0, self.scale, size)
        return rng.uniform(-self.scale, self.scale, size)


@dataclass(frozen=True)
class GenerativeModel:
    """DAG plus mechanisms; weights are keyed (child, parent) per edge.

    noise is one NoiseSpec applied to every continuous node, or a mapping
    from continuous node index to its own spec.
    """

    dag: Dag
    kinds: tuple[str, ...]
    weights: dict[tuple[int, int], float]
    intercepts: np.ndarray = None
    noise: NoiseSpec | dict[int, NoiseSpec] = field(default_factory=NoiseSpec)

    def __post_init__(self):
        p = self.dag.node_count
        if len(self.kinds) != p:
            raise UsageError(f"{len(self.kinds)} kinds for {p} nodes")
        for kind in self.kinds:
            if kind not in ("continuous", "binary"):
                raise UsageError(f"unknown node kind {kind!r}")
        expected = {(j, i) for i, j in self.dag.edges}
        if set(self.weights) != expected:
            raise UsageError(
                "weights must be keyed (child, parent) for exactly the DAG's edges; "
                f"missing {sorted(expected - set(self.weights))}, "
                f"extra {sorted(set(self.weights) - expected)}"
            )
        intercepts = self.intercepts
        if intercepts is None:
            intercepts = np.zeros(p)
        intercepts = np.asarray(intercepts, dtype=np.float64)
        if intercepts.shape != (p,):
            raise UsageError(f"intercepts must have shape ({p},), got {intercepts.shape}")
        continuous = [i for i, k in enumerate(self.kinds) if k == "continuous"]
        if isinstance(self.noise, NoiseSpec):
            noise_by_node = {i: self.noise for i in continuous}
        else:
            noise_by_node = dict(self.noise)
            if sorted(noise_by_node) != continuous:
                raise UsageError(
                    f"noise mapping must cover exactly the continuous nodes {continuous}, "
                    f"got {sorted(noise_by_node)}"
                )
        object.__setattr__(self, "kinds", tuple(self.kinds))
        object.__setattr__(self, "weights", dict(self.weights))
        object.__setattr__(self, "intercepts", intercepts)
        object.__setattr__(self, "_noise_by_node", noise_by_node)

    @property
    def node_count(self) -> int:
        return self.dag.node_count

    def noise_for(self, node: int) -> NoiseSpec:
        return self._noise_by_node[node]

    def schema(self, names: list[str] | None = None) -> list[ColumnSchema]:
        names = names if names is not None else default_names(self.node_count)
        return [ColumnSchema(n, k) for n, k in zip(names, self.kinds)]

    def binary_indices(self) -> list[int]:
        return [i for i, k in enumerate(self.kinds) if k == "binary"]

    def continuous_indices(self) -> list[int]:
        return [i for i, k in enumerate(self.kinds) if k == "continuous"]


def random_dag(p: int, edge_prob: float, rng: np.random.Generator) -> Dag:
    """Random DAG by sequential insertion: visit each unordered node pair once
    in a random order, flip one coin per pair, orient the accepted edge by a
    fair coin, and reverse that orientation when it would close a directed
    cycle. One direction is always legal (both blocked would mean a cycle
    already existed), so a pair gains an edge with probability exactly
    edge_prob and the edge count is Binomial(p(p-1)/2, edge_prob).
    """
    if p < 1:
        raise UsageError(f"p must be positive, got {p}")
    if not (0.0 <= edge_prob <= 1.0):
        raise UsageError(f"edge_prob must be in [0, 1], got {edge_prob}")
    pairs = [(i, j) for i in range(p) for j in range(i + 1, p)]
    order = rng.permutation(len(pairs))
    coins = rng.random(len(pairs))
    flips = rng.random(len(pairs))
    edges: set[tuple[int, int]] = set()
    desc = [0] * p  # desc[i] = bitmask of nodes reachable from i
    for k, pos in enumerate(order):
        if coins[k] >= edge_prob:
            continue
        i, j = pairs[pos]
        if flips[k] < 0.5:
            i, j = j, i
        if (desc[j] >> i) & 1:  # j already reaches i; i -> j would close a cycle
            i, j = j, i
        edges.add((i, j))
        gained = desc[j] | (1 << j)
        desc = [d | gained if (a == i or (d >> i) & 1) else d for a, d in enumerate(desc)]
    return Dag(p, frozenset(edges))


def random_weights(
    dag: Dag, rng: np.random.Generator, low: float = 0.5, high: float = 1.0
) -> dict[tuple[int, int], float]:
    """One weight per edge: magnitude uniform on [low, high], sign fair."""
    if not (0 < low <= high):
        raise UsageError(f"need 0 < low <= high, got [{low}, {high}]")
    out = {}
    for i, j in sorted(dag.edges):
        magnitude = rng.uniform(low, high)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        out[(j, i)] = float(sign * magnitude)
    return out


def random_model(
    dag: Dag,
    c: int,
    rng: np.random.Generator,
    weight_low: float = 0.5,
    weight_high: float = 1.0,
    noise: NoiseSpec | None = None,
) -> GenerativeModel:
    """Parameterize a DAG: the first c labels of a random permutation become
    the continuous nodes and the rest binary; each edge weight has magnitude
    uniform in [weight_low, weight_high] with a fair random sign; intercepts
    are zero.
    """
    p = dag.node_count
    if not (0 <= c <= p):
        raise UsageError(f"continuous count c must be in [0, {p}], got {c}")
    perm = rng.permutation(p)
    continuous = set(int(i) for i in perm[:c])
    kinds = tuple("continuous" if i in continuous else "binary" for i in range(p))
    weights = random_weights(dag, rng, weight_low, weight_high)
    return GenerativeModel(dag, kinds, weights, noise=noise or NoiseSpec())


def propagate(model: GenerativeModel, noise: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Deterministically evaluate every mechanism given its random inputs.

    noise has one column per continuous node (in node-index order) holding its
    additive error; uniforms has one column per binary node holding the U(0,1)
    draw compared against P(state 1). Rows are samples. Exposing this makes
    worked examples exactly checkable.
    """
    noise = np.asarray(noise, dtype=np.float64)
    uniforms = np.asarray(uniforms, dtype=np.float64)
    cont = model.continuous_indices()
    binl = model.binary_indices()
    if noise.ndim != 2 or noise.shape[1] != len(cont):
        raise UsageError(f"noise must have {len(cont)} columns, got shape {noise.shape}")
    if uniforms.ndim != 2 or uniforms.shape[1] != len(binl):
        raise UsageError(f"uniforms must have {len(binl)} columns, got shape {uniforms.shape}")
    if len(binl) > 0 and len(cont) > 0 and noise.shape[0] != uniforms.shape[0]:
        raise UsageError("noise and uniforms must agree on the number of rows")
    m = noise.shape[0] if len(cont) else uniforms.shape[0]
    noise_col = {node: k for k, node in enumerate(cont)}
    uni_col = {node: k for k, node in enumerate(binl)}
    values = np.empty((m, model.node_count))
    for i in topological_order(model.dag):
        z = np.full(m, model.intercepts[i])
        for j in model.dag.parents(i):
            z += model.weights[(i, j)] * values[:, j]
        if model.kinds[i] == "continuous":
            values[:, i] = z + noise[:, noise_col[i]]
        else:
            p_one = sigmoid(z)
            values[:, i] = np.where(uniforms[:, uni_col[i]] < p_one, 1.0, 2.0)
    return values


def sample(model: GenerativeModel, n: int, rng: np.random.Generator, names: list[str] | None = None) -> Dataset:
    """Draw n joint samples from the model as a Dataset.

    Random inputs are drawn up front in node-index order (each continuous
    node's noise from its own spec, then uniforms for binary nodes) so the
    draw sequence is fixed by the schema alone, not by the graph.
    """
    if n < 1:
        raise DataValidationError(f"sample count must be positive, got {n}")
    cont = model.continuous_indices()
    noise = np.empty((n, len(cont)))
    for k, node in enumerate(cont):
        noise[:, k] = model.noise_for(node).draw(rng, n)
    uniforms = rng.random((n, len(model.binary_indices())))
    values = propagate(model, noise, uniforms)
    return Dataset(model.schema(names), values)
