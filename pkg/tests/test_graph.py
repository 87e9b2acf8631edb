"""Graph structures, enumeration streams, and serialization."""

import itertools
import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridcd.errors import CapabilityError, DataValidationError, StructureError, UsageError
from hybridcd.graph import (
    Dag,
    Skeleton,
    count_dags,
    dag_from_json,
    dag_to_dot,
    dag_to_json,
    enumerate_dags,
    enumerate_orientations,
    skeleton_from_json,
    skeleton_of,
    skeleton_to_dot,
    skeleton_to_json,
    skeletons_equal,
    structures_equal,
    topological_order,
)


def labeled_dag_count_oracle(n: int) -> int:
    """Independent count of labeled DAGs: inclusion-exclusion over the set of
    sources, a(n) = sum_k (-1)^(k+1) C(n,k) 2^(k(n-k)) a(n-k).
    """
    if n == 0:
        return 1
    return sum(
        (-1) ** (k + 1) * math.comb(n, k) * 2 ** (k * (n - k)) * labeled_dag_count_oracle(n - k)
        for k in range(1, n + 1)
    )


def random_dag_strategy(max_nodes=5):
    def build(draw):
        p = draw(st.integers(min_value=1, max_value=max_nodes))
        perm = draw(st.permutations(range(p)))
        pairs = [(perm[i], perm[j]) for i in range(p) for j in range(i + 1, p)]
        chosen = draw(st.sets(st.sampled_from(pairs)) if pairs else st.just(set()))
        return Dag(p, frozenset(chosen))

    return st.composite(lambda draw: build(draw))()


class TestDag:
    def test_edges_normalized_and_frozen(self):
        g = Dag(3, frozenset({(0, 1), (1, 2)}))
        assert g.edge_count == 2
        assert g.parents(2) == (1,)
        assert g.children(0) == (1,)
        with pytest.raises(AttributeError):
            g.node_count = 5

    def test_rejects_cycle(self):
        with pytest.raises(StructureError):
            Dag(2, frozenset({(0, 1), (1, 0)}))
        with pytest.raises(StructureError):
            Dag(3, frozenset({(0, 1), (1, 2), (2, 0)}))

    def test_rejects_self_loop(self):
        with pytest.raises(StructureError):
            Dag(2, frozenset({(1, 1)}))

    def test_rejects_out_of_range(self):
        with pytest.raises(StructureError):
            Dag(2, frozenset({(0, 2)}))

    def test_rejects_bad_node_count(self):
        with pytest.raises(StructureError):
            Dag(0)

    def test_equal_by_value(self):
        assert Dag(3, frozenset({(0, 1)})) == Dag(3, frozenset({(0, 1)}))
        assert hash(Dag(3)) == hash(Dag(3))


class TestSkeleton:
    def test_canonical_pair_order(self):
        s = Skeleton(3, frozenset({(2, 0), (1, 2)}))
        assert s.edges == frozenset({(0, 2), (1, 2)})

    def test_rejects_self_loop(self):
        with pytest.raises(StructureError):
            Skeleton(3, frozenset({(1, 1)}))

    def test_neighbors(self):
        s = Skeleton(4, frozenset({(0, 2), (1, 2), (2, 3)}))
        assert s.neighbors(2) == (0, 1, 3)
        assert s.neighbors(0) == (2,)
        assert s.neighbors(1) == (2,)
        assert Skeleton(2).neighbors(0) == ()


class TestTopologicalOrder:
    def test_four_node_diamond(self):
        # X2 -> X1, X2 -> X4, X1 -> X3, X4 -> X3 in 1-based display names.
        g = Dag(4, frozenset({(1, 0), (1, 3), (0, 2), (3, 2)}))
        order = topological_order(g)
        assert order == [1, 0, 3, 2]

    def test_prefers_lowest_index(self):
        g = Dag(3, frozenset({(2, 1)}))
        assert topological_order(g) == [0, 2, 1]

    @settings(max_examples=60)
    @given(random_dag_strategy())
    def test_order_respects_every_edge(self, g):
        order = topological_order(g)
        pos = {node: k for k, node in enumerate(order)}
        assert sorted(order) == list(range(g.node_count))
        for i, j in g.edges:
            assert pos[i] < pos[j]


class TestEnumeration:
    def test_counts_match_recurrence(self):
        for p in range(1, 5):
            assert sum(1 for _ in enumerate_dags(p)) == labeled_dag_count_oracle(p)

    def test_count_dags_matches_oracle(self):
        for p in range(0, 8):
            assert count_dags(p) == labeled_dag_count_oracle(p)
        assert count_dags(6) == 3781503

    def test_no_duplicates_p3(self):
        seen = [g.edges for g in enumerate_dags(3)]
        assert len(seen) == len(set(seen)) == 25

    def test_first_is_empty_graph(self):
        for p in (1, 2, 4):
            first = next(enumerate_dags(p))
            assert first.edge_count == 0

    def test_binary_counter_order_p2(self):
        # Pairs in lex order: (0,1) then (1,0); MSB first, 0-branch first.
        stream = list(enumerate_dags(2))
        assert [g.edges for g in stream] == [
            frozenset(),
            frozenset({(1, 0)}),
            frozenset({(0, 1)}),
        ]

    def test_rejects_bad_sizes(self):
        with pytest.raises(UsageError):
            list(enumerate_dags(0))
        with pytest.raises(CapabilityError):
            list(enumerate_dags(7))

    def test_ceiling_is_six(self):
        gen = enumerate_dags(6)
        assert next(gen).edge_count == 0


class TestOrientations:
    def brute_force(self, s: Skeleton):
        edges = sorted(s.edges)
        out = set()
        for flips in itertools.product([False, True], repeat=len(edges)):
            directed = frozenset(
                (b, a) if f else (a, b) for (a, b), f in zip(edges, flips)
            )
            try:
                out.add(Dag(s.node_count, directed).edges)
            except StructureError:
                pass
        return out

    def test_matches_brute_force(self):
        cases = [
            Skeleton(3, frozenset({(0, 1), (1, 2), (0, 2)})),
            Skeleton(4, frozenset({(0, 1), (1, 2), (2, 3), (0, 3)})),
            Skeleton(4, frozenset()),
            Skeleton(5, frozenset({(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)})),
        ]
        for s in cases:
            got = [g.edges for g in enumerate_orientations(s)]
            assert len(got) == len(set(got))
            assert set(got) == self.brute_force(s)

    def test_triangle_excludes_cycles(self):
        s = Skeleton(3, frozenset({(0, 1), (1, 2), (0, 2)}))
        assert sum(1 for _ in enumerate_orientations(s)) == 6

    def test_every_orientation_has_same_skeleton(self):
        s = Skeleton(4, frozenset({(0, 1), (1, 2), (1, 3)}))
        for g in enumerate_orientations(s):
            assert skeletons_equal(skeleton_of(g), s)


class TestEquality:
    def test_structures_equal(self):
        a = Dag(3, frozenset({(0, 1)}))
        b = Dag(3, frozenset({(1, 0)}))
        assert structures_equal(a, a)
        assert not structures_equal(a, b)

    def test_mismatched_sizes_rejected(self):
        with pytest.raises(UsageError):
            structures_equal(Dag(2), Dag(3))
        with pytest.raises(UsageError):
            skeletons_equal(Skeleton(2), Skeleton(3))

    @settings(max_examples=40)
    @given(random_dag_strategy())
    def test_skeleton_roundtrip_consistency(self, g):
        s = skeleton_of(g)
        assert s.edge_count == g.edge_count
        for i, j in g.edges:
            assert (min(i, j), max(i, j)) in s.edges


class TestSerialization:
    def test_dag_json_roundtrip(self):
        g = Dag(4, frozenset({(1, 0), (1, 3), (0, 2), (3, 2)}))
        obj = dag_to_json(g)
        assert obj["nodes"] == ["X1", "X2", "X3", "X4"]
        assert ["X2", "X1"] in obj["edges"]
        back, names = dag_from_json(json.loads(json.dumps(obj)))
        assert structures_equal(back, g)
        assert names == obj["nodes"]

    def test_custom_names(self):
        g = Dag(2, frozenset({(0, 1)}))
        obj = dag_to_json(g, names=["price", "demand"])
        assert obj["edges"] == [["price", "demand"]]

    def test_skeleton_json_roundtrip(self):
        s = Skeleton(3, frozenset({(0, 2), (1, 2)}))
        back, names = skeleton_from_json(skeleton_to_json(s))
        assert skeletons_equal(back, s)
        assert names == ["X1", "X2", "X3"]

    def test_json_rejects_cycle(self):
        obj = {"nodes": ["a", "b"], "edges": [["a", "b"], ["b", "a"]]}
        with pytest.raises(DataValidationError):
            dag_from_json(obj)

    def test_json_rejects_unknown_node(self):
        with pytest.raises(DataValidationError):
            dag_from_json({"nodes": ["a"], "edges": [["a", "z"]]})

    def test_json_rejects_malformed(self):
        with pytest.raises(DataValidationError):
            dag_from_json({"nodes": ["a", "a"], "edges": []})
        with pytest.raises(DataValidationError):
            dag_from_json({"edges": []})

    def test_dot_output(self):
        g = Dag(2, frozenset({(0, 1)}))
        dot = dag_to_dot(g)
        assert dot.startswith("digraph {")
        assert '"X1" -> "X2";' in dot
        sdot = skeleton_to_dot(skeleton_of(g))
        assert sdot.startswith("graph {")
        assert '"X1" -- "X2";' in sdot

    def test_name_count_mismatch(self):
        with pytest.raises(UsageError):
            dag_to_json(Dag(2), names=["only-one"])
