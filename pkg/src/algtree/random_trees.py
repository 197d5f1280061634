"""Random tree generators: the beta-splitting family and helpers for testing."""
from __future__ import annotations

import bisect
import heapq
import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np
from scipy.stats import chi2_contingency

from .core_tree import AlgebraicTree, from_edges
from .measure import MeasureTree
from .shapes import leaf_sample_shape


class RandomTreeError(ValueError):
    """Invalid generator parameters."""


def parse_beta(beta) -> float:
    """Accept floats, ``"inf"`` or ``"-2"``; reject anything below -2."""
    value = float(beta)
    if math.isnan(value) or value < -2:
        raise RandomTreeError(f"beta must lie in [-2, inf], got {beta!r}")
    return value


@dataclass(frozen=True, eq=False)
class SplitLaw:
    """Probabilities ``q[i-1]`` of sending ``i`` of ``n`` leaves to one side."""

    n: int
    beta: float
    q: tuple[float, ...]

    def __call__(self, i: int) -> float:
        return self.q[i - 1] if 1 <= i < self.n else 0.0

    @cached_property
    def cumulative(self) -> list[float]:
        return list(itertools.accumulate(self.q))

    def draw(self, rng: np.random.Generator) -> int:
        """Sample a split size by inverting the cumulative law."""
        cum = self.cumulative
        return min(bisect.bisect_right(cum, rng.random() * cum[-1]), self.n - 2) + 1


@lru_cache(maxsize=4096)
def _split_law(n: int, beta: float) -> SplitLaw:
    half = n // 2  # compute i <= n/2 and mirror, so q(i) = q(n-i) exactly
    if beta == -2:
        w = np.zeros(half)
        w[0] = 1.0
    elif math.isinf(beta):
        w = np.zeros(half)
        w[-1] = 1.0
    else:
        # binom(n, i) B(i+b+1, n-i+b+1) up to factors constant in i
        i = np.arange(1, half + 1, dtype=float)
        logs = np.array(
            [math.lgamma(k + beta + 1) - math.lgamma(k + 1) + math.lgamma(n - k + beta + 1) - math.lgamma(n - k + 1) for k in i]
        )
        w = np.exp(logs - logs.max())
    full = np.zeros(n - 1)
    full[:half] = w
    full[n - 1 - half :] = np.maximum(full[n - 1 - half :], w[::-1])
    return SplitLaw(n, beta, tuple((full / full.sum()).tolist()))


def split_law(n: int, beta) -> SplitLaw:
    if n < 2:
        raise RandomTreeError("split law needs n >= 2")
    return _split_law(int(n), parse_beta(beta))


def _uniform_leaves(edges: list[tuple[int, int]], n_vertices: int) -> MeasureTree:
    tree = from_edges(edges, n=n_vertices)
    leaves = sorted(tree.leaves())
    return MeasureTree(tree, {v: Fraction(1, len(leaves)) for v in leaves})


def _grow_edges(n: int, choose) -> tuple[list[tuple[int, int]], int]:
    """Edges of the unrooted binary tree from recursive splits of ``n`` leaves.

    ``choose(k)`` returns the size of one side when splitting ``k`` leaves.
    The root created by the first split has degree two and is suppressed.
    """
    if n < 1:
        raise RandomTreeError("need at least one leaf")
    if n == 1:
        return [], 1
    children: list[list[int]] = [[]]
    sizes = [n]
    stack = [0]
    while stack:
        v = stack.pop()
        k = sizes[v]
        if k == 1:
            continue
        i = choose(k)
        for part in (i, k - i):
            children[v].append(len(sizes))
            children.append([])
            sizes.append(part)
        # push in reverse so the first part is expanded first
        stack.extend(reversed(children[v]))
    a, b = children[0]
    edges = [(a - 1, b - 1)]
    for v in range(1, len(sizes)):
        edges.extend((v - 1, w - 1) for w in children[v])
    return edges, len(sizes) - 1


def _grow(n: int, choose) -> MeasureTree:
    return _uniform_leaves(*_grow_edges(n, choose))


def _beta_edges(n: int, beta: float, rng: np.random.Generator) -> tuple[list[tuple[int, int]], int]:
    def choose(k: int) -> int:
        return _split_law(k, beta).draw(rng) if k > 2 else 1

    return _grow_edges(n, choose)


def beta_splitting_tree(n: int, beta, seed: int | np.random.Generator) -> MeasureTree:
    """Markov-branching tree on ``n`` leaves, uniform leaf atoms ``1/n``."""
    b = parse_beta(beta)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return _uniform_leaves(*_beta_edges(n, b, rng))


def comb_tree(n: int) -> MeasureTree:
    """Caterpillar on ``n`` leaves."""
    return _grow(n, lambda k: 1)


def symmetric_binary(k: int) -> MeasureTree:
    """Complete binary tree with ``2**k`` leaves (root suppressed)."""
    if k < 0:
        raise RandomTreeError("k must be nonnegative")
    return _grow(2**k, lambda size: size // 2)


def _adjacency(edges: list[tuple[int, int]], n_vertices: int) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = {v: set() for v in range(n_vertices)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    return adj


def _drop_leaf(adj: dict[int, set[int]], rng: np.random.Generator) -> dict[int, set[int]]:
    """Remove a uniform leaf and its branch point from an adjacency map, in place."""
    leaves = sorted(v for v, ws in adj.items() if len(ws) <= 1)
    if len(leaves) < 2:
        raise RandomTreeError("need at least two leaves")
    gone = leaves[int(rng.integers(len(leaves)))]
    if len(adj) == 2:
        del adj[gone]
        for ws in adj.values():
            ws.clear()
        return adj
    (hub,) = adj.pop(gone)
    rest = adj.pop(hub) - {gone}
    if len(rest) != 2:
        raise RandomTreeError("leaf must hang from a degree-3 branch point")
    a, b = rest
    adj[a].discard(hub)
    adj[b].discard(hub)
    adj[a].add(b)
    adj[b].add(a)
    return adj


def remove_random_leaf(mt: MeasureTree, seed: int | np.random.Generator) -> MeasureTree:
    """Delete a uniform leaf together with the branch point it hangs from."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if not mt.in_t2 or mt.arc_mass or len(set(mt.atom_mass.values())) > 1:
        raise RandomTreeError("expects a binary tree with uniform leaf atoms")
    t = mt.tree
    adj = _drop_leaf({v: set(t.adjacency[v]) for v in range(t.n)}, rng)
    keep = sorted(adj)
    index = {v: i for i, v in enumerate(keep)}
    edges = [(index[a], index[b]) for a in keep for b in adj[a] if a < b]
    return _uniform_leaves(edges, len(keep))


# ----------------------------------------------------------------------
# consistency test


@dataclass
class ConsistencyResult:
    statistic: float
    p_value: float
    dof: int
    removed: Counter
    fresh: Counter


def _leaf_shape(adj: dict[int, set[int]], m: int, rng: np.random.Generator) -> str:
    """Shape of ``m`` uniform leaf samples (uniform leaf atoms)."""
    leaves = sorted(v for v, ws in adj.items() if len(ws) <= 1)
    picks = rng.integers(len(leaves), size=m)
    return leaf_sample_shape(adj, [leaves[i] for i in picks]).key


def sampling_consistency_test(beta, n: int, m: int, N: int, seed: int, min_expected: float = 5.0) -> ConsistencyResult:
    """Chi-square homogeneity test of m-shapes: leaf-removed ``T_n`` versus fresh ``T_{n-1}``.

    Each of the ``N`` replicas contributes one shape from each side.  Shape
    classes with small expected counts are pooled before testing.
    """
    if N < 1:
        raise RandomTreeError("N must be positive")
    if n < 3 or m < 1:
        raise RandomTreeError("need n >= 3 and m >= 1")
    b = parse_beta(beta)
    rng = np.random.default_rng(seed)
    removed: Counter = Counter()
    fresh: Counter = Counter()
    for _ in range(N):
        big = _drop_leaf(_adjacency(*_beta_edges(n, b, rng)), rng)
        removed[_leaf_shape(big, m, rng)] += 1
        fresh[_leaf_shape(_adjacency(*_beta_edges(n - 1, b, rng)), m, rng)] += 1
    keys = sorted(set(removed) | set(fresh))
    total = {k: removed[k] + fresh[k] for k in keys}
    big = [k for k in keys if total[k] / 2 >= min_expected]
    small = [k for k in keys if k not in big]
    rows = [[removed[k] for k in big], [fresh[k] for k in big]]
    if small:
        rows[0].append(sum(removed[k] for k in small))
        rows[1].append(sum(fresh[k] for k in small))
    if len(rows[0]) < 2:
        return ConsistencyResult(0.0, 1.0, 0, removed, fresh)
    stat, p, dof, _ = chi2_contingency(np.array(rows), correction=False)
    return ConsistencyResult(float(stat), float(p), int(dof), removed, fresh)


# ----------------------------------------------------------------------
# generic random trees for experiments and tests


def random_tree(n: int, rng: np.random.Generator) -> AlgebraicTree:
    """Uniform labelled tree on ``n`` vertices via a random Pruefer code."""
    if n < 1:
        raise RandomTreeError("need at least one vertex")
    if n <= 2:
        return from_edges([(0, 1)] if n == 2 else [], n=n)
    code = [int(x) for x in rng.integers(0, n, size=n - 2)]
    degree = [1] * n
    for x in code:
        degree[x] += 1
    heap = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(heap)
    edges = []
    for x in code:
        leaf = heapq.heappop(heap)
        edges.append((leaf, x))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(heap, x)
    edges.append((heapq.heappop(heap), heapq.heappop(heap)))
    return from_edges(edges, n=n)


def random_atomic_tree(n: int, rng: np.random.Generator, max_atoms: int | None = None) -> MeasureTree:
    """Random tree with random rational atoms on a random vertex subset."""
    tree = random_tree(n, rng)
    k = int(rng.integers(1, (max_atoms or n) + 1)) if n > 1 else 1
    k = min(k, n)
    chosen = rng.choice(n, size=k, replace=False)
    weights = [int(w) for w in rng.integers(1, 10, size=k)]
    total = sum(weights)
    return MeasureTree(tree, {int(v): Fraction(w, total) for v, w in zip(chosen, weights)})


def random_binary_tree(n_leaves: int, rng: np.random.Generator) -> AlgebraicTree:
    """Binary tree grown by attaching leaves to uniformly chosen edges."""
    if n_leaves == 1:
        return from_edges([], n=1)
    edges = [(0, 1)]
    nxt = 2
    for _ in range(n_leaves - 2):
        a, b = edges.pop(int(rng.integers(len(edges))))
        mid, leaf = nxt, nxt + 1
        nxt += 2
        edges += [(a, mid), (mid, b), (mid, leaf)]
    return from_edges(edges, n=nxt)


def random_t2_tree(n_leaves: int, rng: np.random.Generator) -> MeasureTree:
    """Random binary tree with leaf atoms, leaf arcs, or both (some leaves empty)."""
    tree = random_binary_tree(n_leaves, rng)
    leaves = sorted(tree.leaves())
    atoms: dict[int, int] = {}
    arcs: dict[int, int] = {}
    for v in leaves:
        kind = int(rng.integers(5))
        if kind in (0, 3):
            atoms[v] = int(rng.integers(1, 7))
        if kind in (1, 3):
            arcs[v] = int(rng.integers(1, 7))
        if kind == 2 and tree.n == 1:
            atoms[v] = 1
    if not atoms and not arcs:
        atoms[leaves[0]] = 1
    if tree.n == 1:
        return MeasureTree(tree, {0: 1})
    total = sum(atoms.values()) + sum(arcs.values())
    return MeasureTree(
        tree,
        {v: Fraction(w, total) for v, w in atoms.items()},
        {v: Fraction(w, total) for v, w in arcs.items()},
    )
