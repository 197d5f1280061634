import itertools
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from algtree.core_tree import from_edges
from algtree.measure import (
    MeasureError,
    MeasureTree,
    branch_point_distribution,
    branch_point_distribution_bruteforce,
    distance_matrix,
    equivalent,
    measure_canonical_form,
    measure_tree_from_dict,
    measure_tree_to_dict,
    r_nu,
    reduce,
    total_length,
)

from .conftest import atomic_trees

F = Fraction


class TestConstruction:
    def test_rejects_floats(self):
        with pytest.raises(MeasureError):
            MeasureTree(from_edges([(0, 1)]), {0: 0.5, 1: 0.5})

    def test_rejects_wrong_total(self):
        with pytest.raises(MeasureError):
            MeasureTree(from_edges([(0, 1)]), {0: F(1, 3), 1: F(1, 3)})

    def test_rejects_negative(self):
        with pytest.raises(MeasureError):
            MeasureTree(from_edges([(0, 1)]), {0: F(3, 2), 1: F(-1, 2)})

    def test_rejects_arc_off_leaf(self):
        t = from_edges([(0, 1), (1, 2)])
        with pytest.raises(MeasureError):
            MeasureTree(t, {0: F(1, 2)}, {1: F(1, 2)})

    def test_accepts_strings(self):
        mt = MeasureTree(from_edges([(0, 1)]), {0: "1/3", 1: "2/3"})
        assert mt.atom(1) == F(2, 3)

    def test_t2_flag(self, star):
        assert star.in_t2
        t = from_edges([(0, 1), (1, 2)])
        assert not MeasureTree(t, {1: 1}).in_t2


class TestComponentMass:
    def test_cherry(self, cherry):
        assert cherry.component_mass(0, 1) == F(1, 2)

    def test_star(self, star):
        assert star.component_mass(1, 0) == F(1, 3)
        assert star.component_mass(0, 1) == F(2, 3)

    def test_arc_counts_towards_its_side(self):
        t = from_edges([(0, 1), (1, 2), (1, 3)])
        mt = MeasureTree(t, {0: F(1, 4), 2: F(1, 4)}, {3: F(1, 2)})
        assert mt.component_mass(1, 3) == F(1, 2)
        # the open edge at the leaf lies in the component pointing away from it
        assert mt.component_mass(3, 1) == 1
        assert sorted(mt.component_masses(1)) == [F(1, 4), F(1, 4), F(1, 2)]

    @given(atomic_trees(min_n=2, max_n=15))
    def test_components_partition_mass(self, mt):
        for v in range(mt.tree.n):
            assert sum(mt.component_masses(v)) + mt.atom(v) == 1


class TestBranchPointDistribution:
    def test_single_vertex(self):
        mt = MeasureTree(from_edges([], n=1), {0: 1})
        assert branch_point_distribution(mt).nonzero() == {0: 1}

    def test_cherry(self, cherry):
        nu = branch_point_distribution(cherry)
        assert nu[0] == nu[1] == F(1, 2)

    def test_star(self, star):
        nu = branch_point_distribution(star)
        assert nu[1] == F(2, 9)
        assert nu[0] == nu[2] == nu[3] == F(7, 27)
        assert nu.masses == branch_point_distribution_bruteforce(star).masses

    def test_arcs_need_estimator(self):
        mt = MeasureTree(from_edges([(0, 1)]), {}, {1: 1})
        with pytest.raises(MeasureError, match="empirical"):
            branch_point_distribution(mt)

    def test_bruteforce_limits(self):
        t = from_edges([(0, i) for i in range(1, 50)])
        mt = MeasureTree(t, {i: F(1, 49) for i in range(1, 50)})
        with pytest.raises(MeasureError):
            branch_point_distribution_bruteforce(mt)

    @given(atomic_trees(max_n=15))
    def test_closed_form_matches_enumeration(self, mt):
        assert branch_point_distribution(mt).masses == branch_point_distribution_bruteforce(mt).masses

    @given(atomic_trees(max_n=20))
    def test_total_mass_one(self, mt):
        assert branch_point_distribution(mt).total() == 1


class TestMetric:
    def test_cherry(self, cherry):
        assert r_nu(cherry, 0, 1) == F(1, 2)
        assert r_nu(cherry, 0, 0) == 0

    def test_star_leaf_to_leaf(self, star):
        # nu[a,b] = 7/27 + 2/9 + 7/27, minus half of each endpoint atom
        assert r_nu(star, 0, 2) == F(13, 27)
        assert r_nu(star, 1, 0) == F(13, 54)

    def test_single_point_matrix(self, star):
        assert distance_matrix(star, [2]) == [[0]]

    @given(atomic_trees(max_n=12))
    def test_branch_point_identity(self, mt):
        t = mt.tree
        d = distance_matrix(mt, list(range(t.n)))
        for x, y, z in itertools.product(range(t.n), repeat=3):
            c = t.branch_point(x, y, z)
            assert d[x][y] + d[y][z] == d[x][z] + 2 * d[c][y]

    @given(atomic_trees(max_n=12))
    def test_pseudometric(self, mt):
        n = mt.tree.n
        d = distance_matrix(mt, list(range(n)))
        for x, y, z in itertools.product(range(n), repeat=3):
            assert d[x][y] == d[y][x] >= 0
            assert d[x][z] <= d[x][y] + d[y][z]

    @given(atomic_trees(min_n=4, max_n=12), st.data())
    def test_four_point_condition(self, mt, data):
        pts = data.draw(st.lists(st.integers(0, mt.tree.n - 1), min_size=4, max_size=4))
        d = distance_matrix(mt, pts)
        sums = sorted([d[0][1] + d[2][3], d[0][2] + d[1][3], d[0][3] + d[1][2]])
        assert sums[1] == sums[2]


class TestTotalLength:
    def test_examples(self, cherry, star):
        assert total_length(cherry) == F(1, 2)
        assert total_length(MeasureTree(from_edges([], n=1), {0: 1})) == 0
        assert total_length(star) == F(13, 18)

    @given(atomic_trees(max_n=15))
    def test_equals_edge_sum(self, mt):
        assert total_length(mt) == sum(r_nu(mt, a, b) for a, b in mt.tree.edges())


class TestEquivalence:
    def test_relabelled_cherry(self):
        a = MeasureTree(from_edges([(0, 1)]), {0: F(1, 3), 1: F(2, 3)})
        b = MeasureTree(from_edges([(0, 1)]), {1: F(1, 3), 0: F(2, 3)})
        c = MeasureTree(from_edges([(0, 1)]), {0: F(1, 2), 1: F(1, 2)})
        assert equivalent(a, a)
        assert equivalent(a, b)
        assert not equivalent(a, c)

    def test_prunes_unsupported_structure(self):
        padded = MeasureTree(from_edges([(0, 1), (1, 2), (2, 3), (2, 4)]), {0: F(1, 3), 3: F(2, 3)})
        plain = MeasureTree(from_edges([(0, 1)]), {0: F(1, 3), 1: F(2, 3)})
        assert equivalent(padded, plain)
        tree, atoms, arcs = reduce(padded)
        assert tree.n == 2 and not arcs

    def test_keeps_the_far_end_of_an_arc(self):
        t = from_edges([(0, 2), (1, 2), (2, 3)])
        mt = MeasureTree(t, {1: F(1, 5)}, {1: F(4, 5)})
        tree, atoms, arcs = reduce(mt)
        assert tree.n == 2
        assert sorted(atoms.values()) == [F(1, 5)] and sorted(arcs.values()) == [F(4, 5)]

    def test_line_segments_coincide(self):
        # any split of diffuse mass over one edge is the same measure tree
        one = MeasureTree(from_edges([(0, 1)]), {}, {1: 1})
        two = MeasureTree(from_edges([(0, 1)]), {}, {0: F(1, 3), 1: F(2, 3)})
        assert equivalent(one, two)

    def test_digest_is_stable(self, star):
        assert measure_canonical_form(star).digest() == measure_canonical_form(star).digest()
        assert len(measure_canonical_form(star).digest()) == 64


def test_json_round_trip():
    t = from_edges([(0, 1), (1, 2), (1, 3)])
    mt = MeasureTree(t, {0: F(1, 4)}, {2: F(1, 4), 3: F(1, 2)})
    data = measure_tree_to_dict(mt)
    assert data["arc_mass"] == {"2": "1/4", "3": "1/2"}
    back = measure_tree_from_dict(data)
    assert back.atom_mass == mt.atom_mass and back.arc_mass == mt.arc_mass


def test_json_bad_rational():
    with pytest.raises(MeasureError):
        measure_tree_from_dict({"vertices": [{"id": 0}], "edges": [], "atom_mass": {"0": "1/0"}})
