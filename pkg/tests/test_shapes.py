import itertools
from collections import Counter
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from algtree.core_tree import from_edges
from algtree.measure import MeasureTree
from algtree.random_trees import beta_splitting_tree, random_binary_tree
from algtree.shapes import (
    SamplePoint,
    ShapeError,
    all_cladogram_keys,
    canonical_key,
    count_cladograms,
    leaf_sample_shape,
    make_cladogram,
    shape,
    shape_class_distribution,
    shape_distribution,
    shape_distribution_bruteforce,
    tv_distance,
    uniform_over,
)

from .conftest import binary_atomic_trees

F = Fraction
A = SamplePoint.atom


def quartet(pairs):
    """Four-leaf cladogram with cherries ``pairs[0]`` and ``pairs[1]``."""
    (a, b), (c, d) = pairs
    adj = [[4], [4], [5], [5], [0, 1, 5], [2, 3, 4]]
    return make_cladogram(adj, {0: {a}, 1: {b}, 2: {c}, 3: {d}}, 4)


def labelled_graph(c):
    g = nx.Graph()
    g.add_nodes_from((v, {"lab": tuple(sorted(c.labels.get(v, ())))}) for v in range(c.n))
    g.add_edges_from((a, b) for a in range(c.n) for b in c.adjacency[a] if a < b)
    return g


class TestCladograms:
    @pytest.mark.parametrize("m, expected", [(1, 1), (2, 1), (3, 1), (4, 3), (5, 15), (6, 105)])
    def test_counts(self, m, expected):
        assert count_cladograms(m) == expected
        keys = all_cladogram_keys(m)
        assert len(keys) == len(set(keys)) == expected

    def test_single_leaf(self):
        c = make_cladogram([[]], {0: [1]}, 1)
        assert canonical_key(c) == "1"

    def test_cherry_swap_changes_key(self):
        assert quartet([(1, 2), (3, 4)]).key == quartet([(2, 1), (4, 3)]).key
        assert quartet([(1, 2), (3, 4)]).key != quartet([(1, 3), (2, 4)]).key

    @pytest.mark.parametrize(
        "adj, labels, m",
        [
            ([[1], [0, 2], [1]], {0: [1], 2: [2]}, 2),
            ([[1], [0]], {0: [1], 1: [1]}, 1),
            ([[1], [0]], {0: [1]}, 1),
            ([[1], [0]], {0: [1], 1: [3]}, 2),
        ],
        ids=["degree-two", "repeated-label", "unlabelled-leaf", "gap"],
    )
    def test_invalid(self, adj, labels, m):
        with pytest.raises(ShapeError):
            make_cladogram(adj, labels, m)

    @given(st.integers(3, 6), st.integers(0, 2**32 - 1))
    def test_key_equality_is_labelled_isomorphism(self, m, seed):
        rng = np.random.default_rng(seed)
        mt = beta_splitting_tree(m + 2, 0, rng)
        leaves = sorted(mt.atom_mass)
        c1, c2 = (shape(mt, [A(int(v)) for v in rng.choice(leaves, size=m, replace=False)]) for _ in range(2))
        iso = nx.is_isomorphic(
            labelled_graph(c1), labelled_graph(c2), node_match=lambda x, y: x["lab"] == y["lab"]
        )
        assert (c1.key == c2.key) == iso


class TestShapeMap:
    def test_star_three_leaves(self, star):
        c = shape(star, [A(0), A(2), A(3)])
        assert c.n == 4 and c.m == 3
        assert c.key == make_cladogram([[3], [3], [3], [0, 1, 2]], {0: [1], 1: [2], 2: [3]}, 3).key

    def test_interior_point_becomes_pendant(self):
        # leaves 0 and 4 meet at 1; 2 is an interior vertex on the path to leaf 3
        t = from_edges([(0, 1), (1, 4), (1, 2), (2, 3)])
        mt = MeasureTree(t, {0: F(1, 4), 4: F(1, 4), 2: F(1, 4), 3: F(1, 4)})
        c = shape(mt, [A(0), A(4), A(2), A(3)])
        assert c.key == quartet([(1, 2), (3, 4)]).key
        # the spanned subtree has only three leaves, so the map is not injective
        assert len(c.leaves()) == 4

    def test_points_on_a_line_form_a_comb(self):
        line = MeasureTree(from_edges([(0, 1)]), {}, {1: 1})
        pts = [SamplePoint.arc(1, u) for u in (F(1, 5), F(3, 5), F(2, 5), F(4, 5))]
        # order along the line: labels 1, 3, 2, 4
        assert shape(line, pts).key == quartet([(1, 3), (2, 4)]).key

    def test_coincident_atoms_share_a_leaf(self, cherry):
        c = shape(cherry, [A(0), A(0)])
        assert c.n == 1 and c.labels[0] == {1, 2}

    def test_rejects_branch_point_sample(self):
        t = from_edges([(0, 1), (1, 2), (1, 3)])
        mt = MeasureTree(t, {1: F(1, 2), 0: F(1, 2)})
        with pytest.raises(ShapeError):
            shape(mt, [A(1), A(0)])

    def test_rejects_massless_atom(self, star):
        with pytest.raises(ShapeError):
            shape(star, [A(1)])

    @given(binary_atomic_trees(), st.data())
    def test_permutation_equivariance(self, mt, data):
        support = [v for v in sorted(mt.atom_mass) if mt.tree.degree(v) < 3]
        pts = data.draw(st.lists(st.sampled_from(support), min_size=1, max_size=6))
        perm = data.draw(st.permutations(range(len(pts))))
        base = shape(mt, [A(v) for v in pts])
        moved = shape(mt, [A(pts[perm[i]]) for i in range(len(pts))])
        # label i of ``moved`` is label perm[i] of ``base``
        back = {perm[i] + 1: i + 1 for i in range(len(pts))}
        assert base.relabel(back).key == moved.key

    @given(st.integers(2, 12), st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_leaf_fast_path_agrees(self, n, m, seed):
        rng = np.random.default_rng(seed)
        mt = beta_splitting_tree(n, 0, rng)
        t = mt.tree
        picks = [int(v) for v in rng.choice(sorted(mt.atom_mass), size=m)]
        adj = {v: set(t.adjacency[v]) for v in range(t.n)}
        assert leaf_sample_shape(adj, picks).key == shape(mt, [A(v) for v in picks]).key


class TestDistributions:
    def test_cherry_pairs(self, cherry):
        d = shape_distribution(cherry, 2)
        assert sorted(d.probabilities.values()) == [F(1, 2), F(1, 2)]
        assert d["1+2"] == F(1, 2)

    def test_star_triples(self, star):
        d = shape_distribution(star, 3)
        distinct = [k for k in d.probabilities if "+" not in k]
        assert len(distinct) == 1
        assert d[distinct[0]] == F(6, 27)

    def test_single_sample(self, star):
        assert shape_distribution(star, 1).probabilities == {"1": 1}

    @given(binary_atomic_trees(max_leaves=6), st.integers(1, 4))
    def test_orbit_enumeration_matches_bruteforce(self, mt, m):
        exact = shape_distribution(mt, m)
        assert exact.total() == 1
        assert exact.probabilities == shape_distribution_bruteforce(mt, m).probabilities

    def test_class_distribution_sums_to_one(self, star):
        law = shape_class_distribution(star, 4)
        assert sum(law.values()) == 1

    def test_exact_limits(self):
        line = MeasureTree(from_edges([(0, 1)]), {}, {1: 1})
        with pytest.raises(ShapeError):
            shape_distribution(line, 2)
        t = random_binary_tree(14, np.random.default_rng(0))
        mt = MeasureTree(t, {v: F(1, 14) for v in t.leaves()})
        with pytest.raises(ShapeError):
            shape_distribution(mt, 3)

    def test_sampled_needs_seed(self, star):
        with pytest.raises(ShapeError):
            shape_distribution(star, 3, "sampled", N=10)

    def test_linear_tree_orders_are_uniform(self):
        line = MeasureTree(from_edges([(0, 1)]), {}, {0: F(1, 2), 1: F(1, 2)})
        d = shape_distribution(line, 4, "sampled", N=100_000, seed=11)
        keys = all_cladogram_keys(4)
        assert set(d.counts) == set(keys)
        # each of the 4! orders maps onto one of 3 combs, 8 orders apiece
        assert chisquare([d.counts[k] for k in keys]).pvalue > 1e-3

    def test_thread_count_does_not_matter(self, star):
        one = shape_distribution(star, 3, "sampled", N=25_000, seed=5, threads=1)
        three = shape_distribution(star, 3, "sampled", N=25_000, seed=5, threads=3)
        assert one.counts == three.counts

    def test_sampled_tracks_exact(self):
        mt = beta_splitting_tree(8, -1.5, 3)
        exact = shape_distribution(mt, 3)
        sampled = shape_distribution(mt, 3, "sampled", N=40_000, seed=8)
        assert float(tv_distance(exact, sampled)) < 0.02


def test_tv_distance_extremes(star):
    d = shape_distribution(star, 3)
    assert tv_distance(d, d) == 0
    a = uniform_over(["x"], 3)
    b = uniform_over(["y"], 3)
    assert tv_distance(a, b) == 1
    with pytest.raises(ShapeError):
        tv_distance(a, uniform_over(["x"], 2))


def test_exchangeability_of_distinct_quartets():
    # distinct-leaf quartets of any tree give each labelled quartet the same mass
    mt = beta_splitting_tree(9, 0, 4)
    d = shape_distribution(mt, 4)
    distinct = Counter({k: p for k, p in d.probabilities.items() if "+" not in k})
    assert len(set(distinct.values())) == 1
    assert set(distinct) == set(all_cladogram_keys(4))


def test_relabelling_one_quartet_reaches_every_quartet():
    labels = [1, 2, 3, 4]
    c = quartet([(1, 2), (3, 4)])
    seen = {c.relabel(dict(zip(labels, p))).key for p in itertools.permutations(labels)}
    assert seen == set(all_cladogram_keys(4))
