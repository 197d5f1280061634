import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from algtree.core_tree import (
    TreeError,
    canonical_form,
    from_edges,
    is_homomorphism,
    is_isomorphism,
    tree_from_dict,
    tree_to_dict,
    verify_axioms,
)
from algtree.random_trees import random_tree

from .conftest import trees


def path_interval(t, x, y):
    """Oracle: shortest path through networkx."""
    g = nx.Graph(list(t.edges()))
    g.add_nodes_from(range(t.n))
    return nx.shortest_path(g, x, y)


@pytest.fixture
def four_point():
    # x1=0, x2=1 hang off c1=4; x3=2, x4=3 hang off c2=5
    return from_edges([(0, 4), (1, 4), (4, 5), (5, 2), (5, 3)])


class TestConstruction:
    def test_single_vertex(self):
        t = from_edges([], n=1)
        assert t.n == 1
        assert t.degree(0) == 0
        assert t.leaves() == {0}
        assert t.branch_points() == frozenset()

    def test_star(self):
        t = from_edges([(0, 1), (1, 2), (1, 3)])
        assert t.degree(1) == 3
        assert t.branch_points() == {1}
        assert t.leaves() == {0, 2, 3}

    @pytest.mark.parametrize(
        "edges, n",
        [
            ([(0, 1), (1, 2), (2, 0)], 3),
            ([(0, 1), (2, 3)], 4),
            ([(0, 1), (0, 1)], 3),
            ([(0, 0)], 1),
            ([(0, 5)], 2),
        ],
        ids=["cycle", "disconnected", "duplicate", "loop", "out-of-range"],
    )
    def test_rejects_non_trees(self, edges, n):
        with pytest.raises(TreeError):
            from_edges(edges, n=n)

    def test_path_edges(self):
        t = from_edges([(0, 1), (1, 2), (2, 3)])
        assert t.edges() == {(0, 1), (1, 2), (2, 3)}

    def test_unknown_vertex(self):
        t = from_edges([(0, 1)])
        with pytest.raises(TreeError):
            t.branch_point(0, 1, 7)


class TestBranchPoint:
    def test_four_point_figure(self, four_point):
        t = four_point
        assert t.branch_point(0, 1, 2) == 4
        assert t.branch_point(0, 1, 3) == 4
        assert t.branch_point(0, 2, 3) == 5
        assert t.branch_point(1, 2, 3) == 5
        assert t.branch_point_from_order(3, 0, 1, 2) == 4

    def test_star_center(self):
        t = from_edges([(0, 1), (1, 2), (1, 3)])
        assert t.branch_point(0, 2, 3) == 1

    @given(trees(max_n=15), st.data())
    def test_repeated_argument(self, t, data):
        x = data.draw(st.integers(0, t.n - 1))
        y = data.draw(st.integers(0, t.n - 1))
        assert t.branch_point(x, y, y) == y

    @given(trees(max_n=10))
    def test_median_is_on_all_paths(self, t):
        for x, y, z in itertools.product(range(t.n), repeat=3):
            c = t.branch_point(x, y, z)
            for a, b in ((x, y), (y, z), (x, z)):
                assert c in path_interval(t, a, b)

    @given(trees(max_n=10), st.integers(0, 2**16))
    def test_order_route_agrees(self, t, salt):
        rho = salt % t.n
        for x, y, z in itertools.product(range(t.n), repeat=3):
            assert t.branch_point_from_order(rho, x, y, z) == t.branch_point(x, y, z)

    @given(trees(min_n=2, max_n=40), st.integers(0, 2**32 - 1))
    def test_vectorised_matches_scalar(self, t, seed):
        rng = np.random.default_rng(seed)
        xs, ys, zs = rng.integers(0, t.n, size=(3, 50))
        got = t.branch_point_many(xs, ys, zs)
        assert list(got) == [t.branch_point(*map(int, trip)) for trip in zip(xs, ys, zs)]


class TestIntervalsAndComponents:
    def test_interval_examples(self):
        assert from_edges([(0, 1), (1, 2), (2, 3)]).interval(0, 3) == [0, 1, 2, 3]
        star = from_edges([(0, 1), (1, 2), (1, 3)])
        assert star.interval(0, 2) == [0, 1, 2]
        assert star.interval(2, 2) == [2]

    @given(trees(max_n=14))
    def test_interval_matches_path_and_definition(self, t):
        for x, y in itertools.product(range(t.n), repeat=2):
            path = t.interval(x, y)
            assert path == path_interval(t, x, y)
            assert set(path) == {w for w in range(t.n) if t.branch_point(x, y, w) == w}

    def test_component_examples(self):
        assert from_edges([(0, 1), (1, 2)]).component(1, 0) == {0}
        star = from_edges([(0, 1), (1, 2), (1, 3)])
        assert star.component(1, 0) == {0}
        assert star.component(0, 1) == {1, 2, 3}
        assert star.component(2, 2) == {2}

    @given(trees(min_n=2, max_n=14))
    def test_component_matches_graph_removal(self, t):
        g = nx.Graph(list(t.edges()))
        for x in range(t.n):
            h = g.copy()
            h.remove_node(x)
            for y in range(t.n):
                if y != x:
                    assert t.component(x, y) == nx.node_connected_component(h, y)
            assert t.degree(x) == (nx.number_connected_components(h) if t.n > 1 else 0)

    @given(trees(max_n=10), st.integers(0, 2**16))
    def test_root_branch_point_is_below_interval(self, t, salt):
        rho = salt % t.n
        for x, y in itertools.product(range(t.n), repeat=2):
            c = t.branch_point(x, y, rho)
            for v in t.interval(x, y):
                assert t.is_le(rho, c, v)


class TestOrder:
    def test_examples(self):
        path = from_edges([(0, 1), (1, 2)])
        assert path.meet(0, 1, 2) == 1
        assert path.is_le(0, 0, 2)
        star = from_edges([(0, 1), (1, 2), (1, 3)])
        assert star.meet(0, 2, 3) == 1

    @given(trees(max_n=12), st.integers(0, 2**16))
    def test_root_is_minimum(self, t, salt):
        rho = salt % t.n
        assert all(t.is_le(rho, rho, y) for y in range(t.n))


class TestAxioms:
    @given(trees(max_n=12))
    def test_exhaustive_clean(self, t):
        report = verify_axioms(t)
        assert report.ok, report.violations

    def test_single_vertex(self):
        assert verify_axioms(from_edges([], n=1)).ok

    def test_fault_injection(self):
        t = from_edges([(0, 1), (1, 2), (1, 3), (3, 4)])
        table = t.median_table().copy()
        table[0, 2, 4] = 4
        report = verify_axioms(table)
        assert not report.ok
        assert (0, 2, 4) in report.violations["BPM1"]
        assert report.violations["BPM4"]

    def test_callable_source(self):
        t = from_edges([(0, 1), (1, 2)])
        assert verify_axioms(t.branch_point, n=3).ok
        assert not verify_axioms(lambda x, y, z: 0, n=3).ok

    def test_sampled_mode(self):
        t = random_tree(60, np.random.default_rng(5))
        report = verify_axioms(t, mode="sampled", k=2000, seed=1)
        assert report.ok
        assert report.checked > 0


class TestMorphisms:
    def test_identity_and_constant(self):
        t = from_edges([(0, 1), (1, 2), (1, 3)])
        assert is_homomorphism(list(range(4)), t, t)
        assert is_homomorphism([2] * 4, t, t)
        assert is_isomorphism(list(range(4)), t, t)
        assert not is_isomorphism([2] * 4, t, t)

    def test_non_homomorphism(self):
        path = from_edges([(0, 1), (1, 2)])
        # sends the middle vertex off the image path
        assert not is_homomorphism([0, 2, 1], path, path)

    def test_cherry_swap_is_isomorphic(self):
        t1 = from_edges([(0, 2), (1, 2), (2, 3), (3, 4)])
        t2 = from_edges([(1, 2), (0, 2), (2, 3), (3, 4)])
        assert canonical_form(t1) == canonical_form(t2)
        assert is_isomorphism([1, 0, 2, 3, 4], t1, t2)

    @given(trees(max_n=9), trees(max_n=9))
    def test_canonical_form_matches_isomorphism_oracle(self, t1, t2):
        g1, g2 = nx.Graph(list(t1.edges())), nx.Graph(list(t2.edges()))
        g1.add_nodes_from(range(t1.n))
        g2.add_nodes_from(range(t2.n))
        assert (canonical_form(t1) == canonical_form(t2)) == nx.is_isomorphic(g1, g2)

    @given(trees(max_n=12), st.integers(0, 2**32 - 1))
    def test_canonical_form_ignores_relabelling(self, t, seed):
        perm = np.random.default_rng(seed).permutation(t.n)
        t2 = from_edges([(int(perm[a]), int(perm[b])) for a, b in t.edges()], n=t.n)
        assert canonical_form(t) == canonical_form(t2)
        assert is_isomorphism([int(p) for p in perm], t, t2)


def test_json_round_trip():
    t = from_edges([(0, 1), (1, 2), (1, 3)])
    data = tree_to_dict(t)
    back, index = tree_from_dict(data)
    assert back.edges() == t.edges()
    assert index == {0: 0, 1: 1, 2: 2, 3: 3}


def test_json_sparse_ids():
    data = {"vertices": [{"id": 10}, {"id": 4}, {"id": 7}], "edges": [[10, 4], [4, 7]]}
    t, index = tree_from_dict(data)
    assert index == {4: 0, 7: 1, 10: 2}
    assert t.degree(index[4]) == 2


@pytest.mark.parametrize(
    "data",
    [{"edges": []}, {"vertices": [{"id": 0}], "edges": [[0, 3]]}, {"vertices": [{"id": -1}], "edges": []}],
)
def test_json_malformed(data):
    with pytest.raises(TreeError):
        tree_from_dict(data)
