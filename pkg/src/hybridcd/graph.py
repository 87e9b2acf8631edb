"""Directed acyclic graphs over integer-indexed nodes.

Nodes are the column indices 0..p-1 of whatever dataset a graph is bound to;
display names live in the dataset schema and enter only at (de)serialization.
Provides exhaustive enumeration of all labeled DAGs on p nodes and of all
acyclic orientations of an undirected skeleton, both as deterministic streams.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import CapabilityError, DataValidationError, StructureError, UsageError

# Hard ceiling for full-DAG enumeration: 3,781,503 DAGs at p=6 is the last
# size where a complete scan stays practical.
DAG_ENUM_CEILING = 6


@dataclass(frozen=True)
class Dag:
    """Immutable directed acyclic graph; edge (i, j) means i -> j."""

    node_count: int
    edges: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        if not isinstance(self.node_count, int) or self.node_count < 1:
            raise StructureError(f"node_count must be a positive integer, got {self.node_count!r}")
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        object.__setattr__(self, "edges", edges)
        for i, j in edges:
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise StructureError(f"edge ({i}, {j}) out of range for {self.node_count} nodes")
            if i == j:
                raise StructureError(f"self-loop at node {i}")
        if not _is_acyclic(self.node_count, edges):
            raise StructureError("edges contain a directed cycle")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def parents(self, j: int) -> tuple[int, ...]:
        """Sorted parent indices of node j."""
        return tuple(sorted(i for i, k in self.edges if k == j))

    def children(self, i: int) -> tuple[int, ...]:
        """Sorted child indices of node i."""
        return tuple(sorted(k for a, k in self.edges if a == i))


@dataclass(frozen=True)
class Skeleton:
    """Undirected edge structure; pairs stored canonically (min index first)."""

    node_count: int
    edges: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        if not isinstance(self.node_count, int) or self.node_count < 1:
            raise StructureError(f"node_count must be a positive integer, got {self.node_count!r}")
        canon = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise StructureError(f"self-loop at node {a}")
            if not (0 <= a < self.node_count and 0 <= b < self.node_count):
                raise StructureError(f"edge ({a}, {b}) out of range for {self.node_count} nodes")
            canon.add((min(a, b), max(a, b)))
        object.__setattr__(self, "edges", frozenset(canon))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> tuple[int, ...]:
        """Sorted indices adjacent to node i."""
        out = []
        for a, b in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return tuple(sorted(out))


def _is_acyclic(node_count: int, edges: Iterable[tuple[int, int]]) -> bool:
    indegree = [0] * node_count
    children: list[list[int]] = [[] for _ in range(node_count)]
    for i, j in edges:
        indegree[j] += 1
        children[i].append(j)
    ready = [i for i in range(node_count) if indegree[i] == 0]
    seen = 0
    while ready:
        seen += 1
        node = ready.pop()
        for child in children[node]:
            indegree[child] -= 1
            if indegree[child] == 0:
                ready.append(child)
    return seen == node_count


def topological_order(g: Dag) -> list[int]:
    """Kahn's algorithm, emitting the lowest-index ready node first.

    Raises StructureError on a cycle, which can only mean the graph was
    corrupted after construction.
    """
    indegree = [0] * g.node_count
    children: list[list[int]] = [[] for _ in range(g.node_count)]
    for i, j in g.edges:
        indegree[j] += 1
        children[i].append(j)
    ready = [i for i in range(g.node_count) if indegree[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        node = heapq.heappop(ready)
        order.append(node)
        for child in children[node]:
            indegree[child] -= 1
            if indegree[child] == 0:
                heapq.heappush(ready, child)
    if len(order) != g.node_count:
        raise StructureError("cycle detected during topological sort")
    return order


def skeleton_of(g: Dag) -> Skeleton:
    """Drop edge directions."""
    return Skeleton(g.node_count, frozenset((min(i, j), max(i, j)) for i, j in g.edges))


def structures_equal(a: Dag, b: Dag) -> bool:
    if a.node_count != b.node_count:
        raise UsageError(f"node_count mismatch: {a.node_count} vs {b.node_count}")
    return a.edges == b.edges


def skeletons_equal(a: Skeleton, b: Skeleton) -> bool:
    if a.node_count != b.node_count:
        raise UsageError(f"node_count mismatch: {a.node_count} vs {b.node_count}")
    return a.edges == b.edges


def count_dags(p: int) -> int:
    """Number of labeled DAGs on p nodes, via the inclusion-exclusion recurrence
    a(n) = sum_{k=1..n} (-1)^(k+1) C(n,k) 2^(k(n-k)) a(n-k), a(0) = 1.
    """
    if p < 0:
        raise UsageError(f"p must be non-negative, got {p}")
    a = [1]
    for n in range(1, p + 1):
        total = 0
        binom = 1
        for k in range(1, n + 1):
            binom = binom * (n - k + 1) // k
            term = binom * (1 << (k * (n - k))) * a[n - k]
            total += term if k % 2 == 1 else -term
        a.append(total)
    return a[p]


def enumerate_dags(p: int) -> Iterator[Dag]:
    """Yield every labeled DAG on p nodes exactly once.

    Order is the binary counter over the p(p-1) ordered pairs in lexicographic
    order, with the first pair as the most significant bit; cyclic subsets are
    pruned incrementally via per-node descendant bitmasks, so the stream never
    touches most of the 2^(p(p-1)) raw subsets.
    """
    if not isinstance(p, int) or p < 1:
        raise UsageError(f"p must be a positive integer, got {p!r}")
    if p > DAG_ENUM_CEILING:
        raise CapabilityError(
            f"full DAG enumeration supports at most p={DAG_ENUM_CEILING}; "
            f"got p={p} (use skeleton-constrained search instead)",
            ceiling=DAG_ENUM_CEILING,
        )
    pairs = [(i, j) for i in range(p) for j in range(p) if i != j]
    m = len(pairs)

    def rec(t: int, edges: list[tuple[int, int]], desc: list[int]) -> Iterator[Dag]:
        if t == m:
            yield Dag(p, frozenset(edges))
            return
        yield from rec(t + 1, edges, desc)
        i, j = pairs[t]
        if not (desc[j] >> i) & 1:  # adding i->j is acyclic iff j does not reach i
            gained = desc[j] | (1 << j)
            new_desc = [d | gained if (a == i or (d >> i) & 1) else d for a, d in enumerate(desc)]
            edges.append((i, j))
            yield from rec(t + 1, edges, new_desc)
            edges.pop()

    yield from rec(0, [], [0] * p)


def enumerate_orientations(s: Skeleton) -> Iterator[Dag]:
    """Yield every acyclic assignment of a direction to each skeleton edge.

    Order is the binary counter over the canonically sorted edge list, first
    edge as the most significant bit; bit 0 keeps the edge as (min -> max).
    """
    edges = sorted(s.edges)
    m = len(edges)
    for code in range(1 << m):
        directed = []
        for t, (a, b) in enumerate(edges):
            if (code >> (m - 1 - t)) & 1:
                directed.append((b, a))
            else:
                directed.append((a, b))
        if _is_acyclic(s.node_count, directed):
            yield Dag(s.node_count, frozenset(directed))


# --- serialization ---------------------------------------------------------


def default_names(p: int) -> list[str]:
    return [f"X{i + 1}" for i in range(p)]


def _check_names(node_count: int, names: list[str] | None) -> list[str]:
    if names is None:
        return default_names(node_count)
    names = list(names)
    if len(names) != node_count:
        raise UsageError(f"got {len(names)} names for {node_count} nodes")
    if len(set(names)) != len(names):
        raise UsageError("node names must be unique")
    return names


def dag_to_json(g: Dag, names: list[str] | None = None) -> dict:
    """JSON-ready mapping: {"nodes": [...], "edges": [[parent, child], ...]}."""
    names = _check_names(g.node_count, names)
    return {
        "nodes": names,
        "edges": [[names[i], names[j]] for i, j in sorted(g.edges)],
    }


def dag_from_json(obj: dict) -> tuple[Dag, list[str]]:
    nodes, pairs = _graph_json_parts(obj)
    index = {name: k for k, name in enumerate(nodes)}
    edges = frozenset((index[a], index[b]) for a, b in pairs)
    try:
        return Dag(len(nodes), edges), nodes
    except StructureError as exc:
        raise DataValidationError(f"invalid graph JSON: {exc.message}") from exc


def skeleton_to_json(s: Skeleton, names: list[str] | None = None) -> dict:
    names = _check_names(s.node_count, names)
    return {
        "nodes": names,
        "edges": [[names[a], names[b]] for a, b in sorted(s.edges)],
    }


def skeleton_from_json(obj: dict) -> tuple[Skeleton, list[str]]:
    nodes, pairs = _graph_json_parts(obj)
    index = {name: k for k, name in enumerate(nodes)}
    edges = frozenset((index[a], index[b]) for a, b in pairs)
    try:
        return Skeleton(len(nodes), edges), nodes
    except StructureError as exc:
        raise DataValidationError(f"invalid skeleton JSON: {exc.message}") from exc


def _graph_json_parts(obj: dict) -> tuple[list[str], list[tuple[str, str]]]:
    if not isinstance(obj, dict) or "nodes" not in obj or "edges" not in obj:
        raise DataValidationError('graph JSON must be an object with "nodes" and "edges"')
    nodes = obj["nodes"]
    if (
        not isinstance(nodes, list)
        or not nodes
        or not all(isinstance(n, str) for n in nodes)
        or len(set(nodes)) != len(nodes)
    ):
        raise DataValidationError('"nodes" must be a non-empty list of unique strings')
    known = set(nodes)
    pairs = []
    for entry in obj["edges"]:
        if not (isinstance(entry, (list, tuple)) and len(entry) == 2):
            raise DataValidationError(f"edge entry {entry!r} must be a [from, to] pair")
        a, b = entry
        if a not in known or b not in known:
            raise DataValidationError(f"edge {entry!r} references an unknown node")
        pairs.append((a, b))
    return list(nodes), pairs


def dag_to_dot(g: Dag, names: list[str] | None = None) -> str:
    names = _check_names(g.node_count, names)
    lines = ["digraph {"]
    for name in names:
        lines.append(f'  "{name}";')
    for i, j in sorted(g.edges):
        lines.append(f'  "{names[i]}" -> "{names[j]}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def skeleton_to_dot(s: Skeleton, names: list[str] | None = None) -> str:
    names = _check_names(s.node_count, names)
    lines = ["graph {"]
    for name in names:
        lines.append(f'  "{name}";')
    for a, b in sorted(s.edges):
        lines.append(f'  "{names[a]}" -- "{names[b]}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
