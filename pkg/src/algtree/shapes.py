"""Sample points, cladograms and shape distributions.

A sample point is either an atom (a vertex) or a point inside the edge that
ends at a leaf carrying arc mass.  Internally every point is normalised to a
*location*::

    ("v", vertex)                 a vertex of the tree
    ("e", leaf, attach, t)        interior of the leaf edge, at distance
                                  t in (0, 1) from ``attach`` towards ``leaf``

On a two-vertex tree the single edge is always described with ``leaf=1``.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .core_tree import AlgebraicTree, from_edges
from .measure import MeasureTree

Number = Union[Fraction, float]
Location = tuple


class ShapeError(ValueError):
    """Invalid sample points or infeasible shape computations."""


@dataclass(frozen=True)
class SamplePoint:
    kind: str
    vertex: int
    position: Number | None = None

    @classmethod
    def atom(cls, v: int) -> "SamplePoint":
        return cls("atom", int(v))

    @classmethod
    def arc(cls, leaf: int, u: Number) -> "SamplePoint":
        return cls("arc", int(leaf), u)


class Locator:
    """Geometry of sample points inside one measure tree."""

    def __init__(self, mt: MeasureTree):
        self.mt = mt
        self.tree = mt.tree
        t = self.tree
        self._attach = {v: t.adjacency[v][0] for v in range(t.n) if len(t.adjacency[v]) == 1}
        self._categories: list[tuple[str, int]] = [("atom", v) for v in sorted(mt.atom_mass)]
        self._categories += [("arc", v) for v in sorted(mt.arc_mass)]
        weights = [mt.atom_mass[v] for v in sorted(mt.atom_mass)]
        weights += [mt.arc_mass[v] for v in sorted(mt.arc_mass)]
        probs = np.array([float(w) for w in weights])
        self._probs = probs / probs.sum()

    # ------------------------------------------------------------------
    def locate(self, point: SamplePoint | Location) -> Location:
        if isinstance(point, tuple):
            return point
        t = self.tree
        if point.kind == "atom":
            t._check(point.vertex)
            if not self.mt.atom(point.vertex):
                raise ShapeError(f"vertex {point.vertex} carries no atom")
            return ("v", point.vertex)
        if point.kind != "arc":
            raise ShapeError(f"unknown sample kind {point.kind!r}")
        leaf, u = point.vertex, point.position
        t._check(leaf)
        if not self.mt.arc(leaf):
            raise ShapeError(f"leaf {leaf} carries no arc mass")
        if u is None or not 0 < u < 1:
            raise ShapeError("arc positions must lie strictly inside (0, 1)")
        if t.n == 2:
            return ("e", 1, 0, u) if leaf == 1 else ("e", 1, 0, 1 - u)
        return ("e", leaf, self._attach[leaf], u)

    def edge_arc_mass(self, leaf: int, attach: int) -> Fraction:
        t = self.tree
        child = leaf if t.parent[leaf] == attach else attach
        return self.mt.edge_arc[child]

    def is_branch(self, loc: Location) -> bool:
        return loc[0] == "v" and self.tree.degree(loc[1]) >= 3

    def _on_leaf_edge(self, loc: Location) -> tuple[int, Number] | None:
        """``(leaf, coordinate)`` if ``loc`` is on the leaf side of a leaf edge."""
        if loc[0] == "e":
            return loc[1], loc[3]
        v = loc[1]
        if self.tree.n == 2:
            return (1, 1) if v == 1 else (1, 0)
        if v in self._attach:
            return v, 1
        return None

    def _from_coordinate(self, leaf: int, coord: Number) -> Location:
        attach = 0 if self.tree.n == 2 else self._attach[leaf]
        if coord == 0:
            return ("v", attach)
        if coord == 1:
            return ("v", leaf)
        return ("e", leaf, attach, coord)

    def median(self, a: Location, b: Location, c: Location) -> Location:
        """Branch point of three locations."""
        if self.tree.n == 1:
            return a
        trio = (a, b, c)
        spots = [self._on_leaf_edge(x) for x in trio]
        groups = Counter(s[0] for s in spots if s is not None)
        if self.tree.n == 2 or (groups and groups.most_common(1)[0][1] >= 2):
            leaf = 1 if self.tree.n == 2 else groups.most_common(1)[0][0]
            coords = sorted(s[1] if s is not None and s[0] == leaf else 0 for s in spots)
            return self._from_coordinate(leaf, coords[1])
        proxies = [x[2] if x[0] == "e" else x[1] for x in trio]
        return ("v", self.tree.branch_point(*proxies))

    def component_mass(self, center: Location, toward: Location) -> Fraction | float:
        """Mass of the component of ``T \\ {center}`` containing ``toward``."""
        if center == toward:
            raise ShapeError("component of a point towards itself")
        mt = self.mt
        if center[0] == "v":
            v = center[1]
            if toward[0] == "v":
                target = toward[1]
            else:
                leaf, attach = toward[1], toward[2]
                target = attach if v == leaf else leaf if v == attach else attach
            return mt.component_mass(v, target)
        _, leaf, attach, t = center
        spread = self.edge_arc_mass(leaf, attach)
        beyond = mt.atom(leaf) + spread * (1 - t)
        spot = self._on_leaf_edge(toward)
        if spot is not None and spot[0] == leaf and spot[1] > t:
            return beyond
        return 1 - beyond

    # ------------------------------------------------------------------
    def sample(self, rng: np.random.Generator, count: int) -> list[Location]:
        """``count`` i.i.d. draws from the measure, as locations."""
        if self.tree.n == 1:
            return [("v", 0)] * count
        picks = rng.choice(len(self._categories), size=count, p=self._probs)
        out: list[Location] = []
        for idx in picks:
            kind, v = self._categories[idx]
            if kind == "atom":
                out.append(("v", v))
            else:
                while True:
                    u = float(rng.random())
                    if u > 0.0:
                        break
                out.append(self.locate(SamplePoint.arc(v, u)))
        return out

    def sample_tuple(self, rng: np.random.Generator, m: int) -> list[Location]:
        """Draw ``m`` points, redrawing arc points that collide exactly."""
        while True:
            locs = self.sample(rng, m)
            arcs = [x for x in locs if x[0] == "e"]
            if len(set(arcs)) == len(arcs):
                return locs


# ----------------------------------------------------------------------
# cladograms


@dataclass(frozen=True)
class Cladogram:
    """Binary tree whose leaves carry disjoint label sets covering ``1..m``."""

    adjacency: tuple[tuple[int, ...], ...]
    labels: Mapping[int, frozenset[int]]
    m: int
    key: str = field(default="", compare=False)

    @property
    def n(self) -> int:
        return len(self.adjacency)

    def tree(self) -> AlgebraicTree:
        edges = [(a, b) for a in range(self.n) for b in self.adjacency[a] if a < b]
        return from_edges(edges, n=self.n)

    def leaves(self) -> list[int]:
        return [v for v in range(self.n) if len(self.adjacency[v]) <= 1]

    def relabel(self, perm: Mapping[int, int]) -> "Cladogram":
        """Apply the label map ``perm`` (a bijection of ``1..m``)."""
        labels = {v: frozenset(perm[x] for x in s) for v, s in self.labels.items()}
        return make_cladogram(self.adjacency, labels, self.m)

    def unlabelled_class(self) -> str:
        """Code shared by all relabellings of this cladogram."""
        counts = [str(len(self.labels.get(v, ()))) for v in range(self.n)]
        return self.tree().canonical_form(counts).code


def _block(labels: Iterable[int]) -> str:
    return "+".join(str(x) for x in sorted(labels))


def _key(adjacency: Sequence[Sequence[int]], labels: Mapping[int, frozenset[int]]) -> str:
    start = next(v for v, s in labels.items() if 1 in s)
    if len(adjacency) == 1:
        return _block(labels[start])
    top = adjacency[start][0]
    # post-order from ``top`` with ``start`` removed
    parent = {top: start}
    order = [top]
    for v in order:
        for w in adjacency[v]:
            if w != parent[v]:
                parent[w] = v
                order.append(w)
    text: dict[int, str] = {}
    low: dict[int, int] = {}
    for v in reversed(order):
        kids = [w for w in adjacency[v] if w != parent[v]]
        if not kids:
            text[v] = _block(labels[v])
            low[v] = min(labels[v])
        else:
            kids.sort(key=low.__getitem__)
            text[v] = "(" + ",".join(text[w] for w in kids) + ")"
            low[v] = low[kids[0]]
    return _block(labels[start]) + "|" + text[top]


def make_cladogram(adjacency: Sequence[Sequence[int]], labels: Mapping[int, Iterable[int]], m: int) -> Cladogram:
    adj = tuple(tuple(sorted(a)) for a in adjacency)
    labs = {int(v): frozenset(s) for v, s in labels.items() if s}
    if sorted(itertools.chain.from_iterable(labs.values())) != list(range(1, m + 1)):
        raise ShapeError("labels must partition 1..m")
    for v in range(len(adj)):
        deg = len(adj[v])
        if deg <= 1 and v not in labs:
            raise ShapeError(f"leaf {v} is unlabelled")
        if deg >= 2 and v in labs:
            raise ShapeError(f"internal vertex {v} carries labels")
        if deg == 2 or deg > 3:
            raise ShapeError(f"vertex {v} has degree {deg}")
    return Cladogram(adj, labs, m, _key(adj, labs))


def canonical_key(c: Cladogram) -> str:
    """Equal for two cladograms iff a label-preserving isomorphism exists."""
    return c.key


def count_cladograms(m: int) -> int:
    """Number of cladograms with ``m`` singly labelled leaves: ``(2m-5)!!``."""
    if m < 1:
        raise ShapeError("m must be positive")
    if m <= 2:
        return 1
    return math.prod(range(1, 2 * m - 4, 2))


def _assemble(nodes: dict, labels: dict[object, set[int]], m: int) -> Cladogram:
    """Turn the subtree spanned by labelled nodes into a cladogram."""
    adj = {v: set(ws) for v, ws in nodes.items()}
    stack = [v for v in adj if len(adj[v]) <= 1 and v not in labels]
    while stack:
        v = stack.pop()
        if v not in adj or len(adj[v]) > 1 or v in labels or len(adj) == 1:
            continue
        for w in adj.pop(v):
            adj[w].discard(v)
            if len(adj[w]) <= 1 and w not in labels:
                stack.append(w)
    for v in list(adj):
        if v in labels and len(adj[v]) >= 2:
            if len(adj[v]) > 2:
                raise ShapeError("a sample sits at a branch point")
            pendant = ("pendant", v)
            adj[pendant] = {v}
            adj[v].add(pendant)
            labels[pendant] = labels.pop(v)
    for v in list(adj):
        if len(adj[v]) == 2 and v not in labels:
            a, b = adj.pop(v)
            adj[a].discard(v)
            adj[b].discard(v)
            adj[a].add(b)
            adj[b].add(a)
    order = sorted(adj, key=repr)
    index = {v: i for i, v in enumerate(order)}
    adjacency = [[index[w] for w in adj[v]] for v in order]
    return make_cladogram(adjacency, {index[v]: s for v, s in labels.items()}, m)


def shape_of_locations(loc: Locator, locs: Sequence[Location]) -> Cladogram:
    t = loc.tree
    m = len(locs)
    if m == 0:
        raise ShapeError("need at least one sample point")
    for x in locs:
        if loc.is_branch(x):
            raise ShapeError(f"sample at branch point {x[1]}")
    if t.n == 1:
        return make_cladogram([[]], {0: range(1, m + 1)}, m)
    keys = set()
    for x in locs:
        if x[0] == "v":
            keys.add(x[1])
        else:
            keys.update((x[1], x[2]))
    # virtual tree on the key vertices plus pairwise ancestors
    ordered = sorted(keys, key=t.tin.__getitem__)
    extra = {t.lca(a, b) for a, b in zip(ordered, ordered[1:])}
    ordered = sorted(keys | extra, key=t.tin.__getitem__)
    nodes: dict[object, set] = {v: set() for v in ordered}
    stack: list[int] = []
    arcs_by_edge: dict[tuple[int, int], list[tuple[Number, Location]]] = {}
    for x in locs:
        if x[0] == "e":
            arcs_by_edge.setdefault((x[2], x[1]), []).append((x[3], x))
    for v in ordered:
        while stack and not t.is_ancestor(stack[-1], v):
            stack.pop()
        if stack:
            top = stack[-1]
            chain: list[object] = [top]
            pair = (top, v) if (top, v) in arcs_by_edge else (v, top)
            pts = arcs_by_edge.get(pair)
            if pts:
                attach, leaf = pair
                inner = [("arc", leaf, tc) for tc in sorted({tc for tc, _ in pts})]
                chain = [attach, *inner, leaf]
            else:
                chain = [top, v]
            for a, b in zip(chain, chain[1:]):
                nodes.setdefault(a, set()).add(b)
                nodes.setdefault(b, set()).add(a)
        stack.append(v)
    labels: dict[object, set[int]] = {}
    for i, x in enumerate(locs, start=1):
        node = x[1] if x[0] == "v" else ("arc", x[1], x[3])
        labels.setdefault(node, set()).add(i)
    return _assemble(nodes, labels, m)


def leaf_sample_shape(adjacency: Mapping[int, Iterable[int]], picks: Sequence[int]) -> Cladogram:
    """Cladogram of samples that sit on leaves of a small tree given by adjacency."""
    labels: dict[object, set[int]] = {}
    for i, v in enumerate(picks, start=1):
        labels.setdefault(v, set()).add(i)
    return _assemble({v: set(ws) for v, ws in adjacency.items()}, labels, len(picks))


def shape(mt: MeasureTree, points: Sequence[SamplePoint | Location]) -> Cladogram:
    """Cladogram spanned by the sample points.

    Coincident atoms share one multi-labelled leaf; a point lying inside the
    path between others receives a pendant leaf.  Points at branch points are
    rejected.
    """
    loc = Locator(mt)
    return shape_of_locations(loc, [loc.locate(p) for p in points])


# ----------------------------------------------------------------------
# distributions


@dataclass
class ShapeDistribution:
    """Law of the labelled shape of ``m`` samples, keyed by canonical key."""

    probabilities: dict[str, Number]
    m: int
    mode: str
    counts: dict[str, int] | None = None
    size: int | None = None
    seed: int | None = None

    def __getitem__(self, key: str) -> Number:
        return self.probabilities.get(key, 0)

    def total(self) -> Number:
        return sum(self.probabilities.values())


def _atom_list(mt: MeasureTree, limit: int) -> list[tuple[int, Fraction]]:
    if not mt.is_atomic:
        raise ShapeError("exact mode needs a purely atomic measure")
    atoms = sorted(mt.atom_mass.items())
    if len(atoms) > limit:
        raise ShapeError(f"exact mode supports at most {limit} atoms, got {len(atoms)}")
    return atoms


def shape_distribution_bruteforce(mt: MeasureTree, m: int) -> ShapeDistribution:
    """Enumerate every ordered m-tuple of atoms (small cases only)."""
    atoms = _atom_list(mt, 12)
    loc = Locator(mt)
    probs: dict[str, Fraction] = {}
    for combo in itertools.product(atoms, repeat=m):
        weight = math.prod((w for _, w in combo), start=Fraction(1))
        key = shape_of_locations(loc, [("v", v) for v, _ in combo]).key
        probs[key] = probs.get(key, Fraction(0)) + weight
    return ShapeDistribution(probs, m, "exact")


def _class_masses(mt: MeasureTree, m: int, max_multisets: int) -> tuple[dict[str, Fraction], dict[str, Cladogram]]:
    atoms = _atom_list(mt, 12)
    if math.comb(len(atoms) + m - 1, m) > max_multisets:
        raise ShapeError(f"too many atom multisets for exact enumeration at m={m}")
    loc = Locator(mt)
    masses: dict[str, Fraction] = {}
    reps: dict[str, Cladogram] = {}
    fact = math.factorial(m)
    for combo in itertools.combinations_with_replacement(range(len(atoms)), m):
        mult = Counter(combo)
        ways = fact // math.prod(math.factorial(c) for c in mult.values())
        weight = ways * math.prod((atoms[i][1] for i in combo), start=Fraction(1))
        clad = shape_of_locations(loc, [("v", atoms[i][0]) for i in combo])
        cls = clad.unlabelled_class()
        masses[cls] = masses.get(cls, Fraction(0)) + weight
        reps.setdefault(cls, clad)
    return masses, reps


def shape_class_distribution(mt: MeasureTree, m: int, max_multisets: int = 500_000) -> dict[str, Fraction]:
    """Exact law of the shape of ``m`` samples with labels forgotten.

    Labels only record multiplicities, so the result is keyed by unlabelled
    classes.  Two labelled shape distributions agree iff these agree, because
    the labelled law is uniform over each relabelling orbit.
    """
    if m < 1:
        raise ShapeError("m must be positive")
    return _class_masses(mt, m, max_multisets)[0]


def _exact(mt: MeasureTree, m: int) -> ShapeDistribution:
    if m > 6:
        raise ShapeError("exact mode supports m <= 6")
    # labelled shapes of exchangeable samples are uniform within each
    # relabelling orbit, so enumerate multisets and spread over orbits
    orbit_mass, orbit_rep = _class_masses(mt, m, math.comb(17, 6))
    probs: dict[str, Fraction] = {}
    labels = list(range(1, m + 1))
    for cls, mass in orbit_mass.items():
        rep = orbit_rep[cls]
        keys = {rep.relabel(dict(zip(labels, perm))).key for perm in itertools.permutations(labels)}
        share = mass / len(keys)
        for key in keys:
            probs[key] = probs.get(key, Fraction(0)) + share
    return ShapeDistribution(probs, m, "exact")


CHUNK = 10_000


def chunk_seeds(seed: int, total: int, chunk: int = CHUNK) -> list[tuple[np.random.SeedSequence, int]]:
    """Seed substreams for fixed-size work chunks, independent of thread count."""
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    return list(zip(children, sizes))


def _sample_chunk(loc: Locator, m: int, ss: np.random.SeedSequence, size: int) -> Counter:
    rng = np.random.default_rng(ss)
    counts: Counter = Counter()
    for _ in range(size):
        counts[shape_of_locations(loc, loc.sample_tuple(rng, m)).key] += 1
    return counts


def shape_distribution(
    mt: MeasureTree,
    m: int,
    mode: str = "exact",
    *,
    N: int | None = None,
    seed: int | None = None,
    threads: int = 1,
) -> ShapeDistribution:
    """Distribution of the labelled shape of ``m`` i.i.d. samples.

    ``mode="exact"`` enumerates atom tuples (atomic trees, at most 12 atoms,
    ``m <= 6``); ``mode="sampled"`` draws ``N`` tuples from ``seed``.
    """
    if m < 1:
        raise ShapeError("m must be positive")
    if mode == "exact":
        return _exact(mt, m)
    if mode != "sampled":
        raise ShapeError(f"unknown mode {mode!r}")
    if N is None or N < 1 or seed is None:
        raise ShapeError("sampled mode needs N >= 1 and a seed")
    loc = Locator(mt)
    jobs = chunk_seeds(seed, N)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parts = list(pool.map(lambda job: _sample_chunk(loc, m, *job), jobs))
    counts: Counter = Counter()
    for part in parts:
        counts.update(part)
    probs = {k: c / N for k, c in counts.items()}
    return ShapeDistribution(probs, m, "sampled", dict(counts), N, seed)


def tv_distance(d1: ShapeDistribution, d2: ShapeDistribution) -> Number:
    """Total variation distance, exact when both inputs are exact."""
    if d1.m != d2.m:
        raise ShapeError("distributions over different m")
    keys = set(d1.probabilities) | set(d2.probabilities)
    return sum((abs(d1[k] - d2[k]) for k in keys), Fraction(0)) / 2


def uniform_over(keys: Iterable[str], m: int) -> ShapeDistribution:
    keys = list(keys)
    return ShapeDistribution({k: Fraction(1, len(keys)) for k in keys}, m, "exact")


def all_cladogram_keys(m: int) -> list[str]:
    """Keys of all singly labelled cladograms on ``m`` leaves (by insertion)."""
    if m == 1:
        return [make_cladogram([[]], {0: [1]}, 1).key]
    # grow by inserting leaf k on every edge of each (k-1)-leaf tree
    trees = [([[1], [0]], {0: {1}, 1: {2}})]
    for k in range(3, m + 1):
        grown = []
        for adj, labs in trees:
            edges = [(a, b) for a in range(len(adj)) for b in adj[a] if a < b]
            for a, b in edges:
                new = [list(x) for x in adj]
                mid, leaf = len(new), len(new) + 1
                new[a].remove(b)
                new[b].remove(a)
                new[a].append(mid)
                new[b].append(mid)
                new.append([a, b, leaf])
                new.append([mid])
                grown.append((new, {**labs, leaf: {k}}))
        trees = grown
    return sorted({make_cladogram(adj, labs, m).key for adj, labs in trees})
