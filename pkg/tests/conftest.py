from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from algtree.core_tree import from_edges
from algtree.measure import MeasureTree
from algtree.random_trees import random_atomic_tree, random_binary_tree, random_t2_tree, random_tree

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@st.composite
def trees(draw, min_n=1, max_n=12):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_tree(n, np.random.default_rng(seed))


@st.composite
def atomic_trees(draw, min_n=1, max_n=12):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_atomic_tree(n, np.random.default_rng(seed))


@st.composite
def t2_trees(draw, min_leaves=1, max_leaves=20):
    n = draw(st.integers(min_leaves, max_leaves))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_t2_tree(n, np.random.default_rng(seed))


@st.composite
def binary_atomic_trees(draw, min_leaves=2, max_leaves=10):
    n = draw(st.integers(min_leaves, max_leaves))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    tree = random_binary_tree(n, rng)
    weights = rng.integers(1, 5, size=tree.n)
    # shapes are undefined for samples at branch points
    support = [v for v in range(tree.n) if tree.degree(v) <= 1]
    total = sum(int(weights[v]) for v in support)
    return MeasureTree(tree, {v: Fraction(int(weights[v]), total) for v in support})


@pytest.fixture
def star():
    """Three leaves 0, 2, 3 around the centre 1, uniform leaf atoms."""
    t = from_edges([(0, 1), (1, 2), (1, 3)])
    return MeasureTree(t, {0: Fraction(1, 3), 2: Fraction(1, 3), 3: Fraction(1, 3)})


@pytest.fixture
def cherry():
    t = from_edges([(0, 1)])
    return MeasureTree(t, {0: Fraction(1, 2), 1: Fraction(1, 2)})
