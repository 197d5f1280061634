"""Measure trees: exact masses, the branch-point distribution and its metric."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Sequence

from .core_tree import AlgebraicTree, CanonicalForm, TreeError, from_edges, tree_from_dict, tree_to_dict


class MeasureError(ValueError):
    """Raised for invalid masses or unsupported operations."""


def _frac(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise MeasureError("masses must be exact; pass Fraction, int or a 'p/q' string")
    return Fraction(value)


class MeasureTree:
    """A finite tree carrying a probability measure.

    Mass lives either on vertices (``atom_mass``) or spread uniformly along the
    edge that ends at a leaf (``arc_mass``, keyed by the leaf).  Both maps hold
    exact rationals summing to one.
    """

    def __init__(
        self,
        tree: AlgebraicTree,
        atom_mass: Mapping[int, object] | None = None,
        arc_mass: Mapping[int, object] | None = None,
    ):
        self.tree = tree
        atoms = {int(v): _frac(m) for v, m in (atom_mass or {}).items()}
        arcs = {int(v): _frac(m) for v, m in (arc_mass or {}).items()}
        for v, m in itertools.chain(atoms.items(), arcs.items()):
            tree._check(v)
            if m < 0:
                raise MeasureError(f"negative mass at vertex {v}")
        for v, m in arcs.items():
            if m and tree.degree(v) != 1:
                raise MeasureError(f"arc mass at {v}, which is not the end of a leaf edge")
        total = sum(atoms.values(), Fraction(0)) + sum(arcs.values(), Fraction(0))
        if total != 1:
            raise MeasureError(f"masses sum to {total}, expected 1")
        self.atom_mass = {v: m for v, m in atoms.items() if m}
        self.arc_mass = {v: m for v, m in arcs.items() if m}

    # ------------------------------------------------------------------
    def atom(self, v: int) -> Fraction:
        return self.atom_mass.get(v, Fraction(0))

    def arc(self, v: int) -> Fraction:
        return self.arc_mass.get(v, Fraction(0))

    @property
    def is_atomic(self) -> bool:
        return not self.arc_mass

    @property
    def is_binary(self) -> bool:
        return all(len(a) <= 3 for a in self.tree.adjacency)

    @property
    def in_t2(self) -> bool:
        """Binary, with atoms only on leaves."""
        leaves = self.tree.leaves()
        return self.is_binary and all(v in leaves for v in self.atom_mass)

    @cached_property
    def edge_arc(self) -> list[Fraction]:
        """Arc mass on the edge above each vertex (w.r.t. the internal root)."""
        out = [Fraction(0)] * self.tree.n
        for leaf, m in self.arc_mass.items():
            if self.tree.parent[leaf] >= 0:
                out[leaf] += m
            else:
                # the internal root is itself a leaf; its edge sits above its child
                out[self.tree.adjacency[leaf][0]] += m
        return out

    @cached_property
    def subtree_mass(self) -> list[Fraction]:
        """Mass of each rooted subtree, excluding the edge above its top vertex."""
        t = self.tree
        sub = [self.atom(v) for v in range(t.n)]
        edge = self.edge_arc
        for v in reversed(t.preorder):
            p = t.parent[v]
            if p >= 0:
                sub[p] += sub[v] + edge[v]
        return sub

    def component_mass(self, x: int, y: int) -> Fraction:
        """Mass of the component of ``T \\ {x}`` that contains ``y``.

        The open edges leaving ``x`` belong to the component they point into,
        so arc mass on an edge at ``x`` counts towards that component.
        """
        t = self.tree
        t._check(x, y)
        if x == y:
            raise MeasureError("component_mass needs x != y")
        if t.is_ancestor(x, y):
            child = t.step_toward(x, y)
            return self.subtree_mass[child] + self.edge_arc[child]
        return 1 - self.subtree_mass[x]

    def component_masses(self, v: int) -> list[Fraction]:
        """Masses of all components of ``T \\ {v}`` (one per neighbour)."""
        t = self.tree
        out = [self.subtree_mass[w] + self.edge_arc[w] for w in t.adjacency[v] if t.parent[w] == v]
        if t.parent[v] >= 0:
            out.append(1 - self.subtree_mass[v])
        return out

    # ------------------------------------------------------------------
    @cached_property
    def _nu(self) -> dict[int, Fraction]:
        if not self.is_atomic:
            raise MeasureError("arc masses present: use the empirical estimator in algtree.stats")
        nu = {}
        for v in range(self.tree.n):
            # c(X,Y,Z) differs from v exactly when two samples share a component
            miss = sum((m * m * (3 - 2 * m) for m in self.component_masses(v)), Fraction(0))
            nu[v] = 1 - miss
        return nu

    def __repr__(self) -> str:
        return (
            f"MeasureTree(edges={sorted(self.tree.edges())}, atoms={self.atom_mass}, "
            f"arcs={self.arc_mass})"
        )


@dataclass(frozen=True)
class BranchPointDistribution:
    """Exact law of the branch point of three independent samples."""

    masses: Mapping[int, Fraction]

    def __getitem__(self, v: int) -> Fraction:
        return self.masses.get(v, Fraction(0))

    def total(self) -> Fraction:
        return sum(self.masses.values(), Fraction(0))

    def nonzero(self) -> dict[int, Fraction]:
        return {v: m for v, m in self.masses.items() if m}


def branch_point_distribution(mt: MeasureTree) -> BranchPointDistribution:
    """Closed form: ``nu{v} = 1 - sum_i m_i^2 (3 - 2 m_i)`` over the component masses at ``v``."""
    return BranchPointDistribution(dict(mt._nu))


def branch_point_distribution_bruteforce(mt: MeasureTree, max_atoms: int = 40) -> BranchPointDistribution:
    """Enumerate every ordered triple of atoms and push its weight to the median."""
    if not mt.is_atomic:
        raise MeasureError("brute force needs a purely atomic measure")
    atoms = sorted(mt.atom_mass.items())
    if len(atoms) > max_atoms:
        raise MeasureError(f"{len(atoms)} atoms exceed the brute-force limit {max_atoms}")
    nu = {v: Fraction(0) for v in range(mt.tree.n)}
    for (x, a), (y, b), (z, c) in itertools.product(atoms, repeat=3):
        nu[mt.tree.branch_point(x, y, z)] += a * b * c
    return BranchPointDistribution(nu)


def _root_path_sums(mt: MeasureTree, nu: Mapping[int, Fraction]) -> list[Fraction]:
    t = mt.tree
    acc = [Fraction(0)] * t.n
    for v in t.preorder:
        p = t.parent[v]
        acc[v] = nu.get(v, Fraction(0)) + (acc[p] if p >= 0 else 0)
    return acc


class _Metric:
    def __init__(self, mt: MeasureTree, nu: Mapping[int, Fraction] | None = None):
        self.mt = mt
        self.nu = dict(nu) if nu is not None else mt._nu
        self.prefix = _root_path_sums(mt, self.nu)

    def interval_mass(self, x: int, y: int) -> Fraction:
        t = self.mt.tree
        top = t.lca(x, y)
        return self.prefix[x] + self.prefix[y] - 2 * self.prefix[top] + self.nu.get(top, Fraction(0))

    def r(self, x: int, y: int) -> Fraction:
        if x == y:
            return Fraction(0)
        half = Fraction(1, 2)
        return self.interval_mass(x, y) - half * self.nu.get(x, 0) - half * self.nu.get(y, 0)


def r_nu(mt: MeasureTree, x: int, y: int, nu: Mapping[int, Fraction] | None = None) -> Fraction:
    """``nu([x, y]) - nu{x}/2 - nu{y}/2`` for the branch-point distribution ``nu``."""
    mt.tree._check(x, y)
    return _Metric(mt, nu).r(x, y)


def distance_matrix(
    mt: MeasureTree, points: Sequence[int], nu: Mapping[int, Fraction] | None = None
) -> list[list[Fraction]]:
    mt.tree._check(*points)
    metric = _Metric(mt, nu)
    return [[metric.r(x, y) for y in points] for x in points]


def total_length(mt: MeasureTree) -> Fraction:
    """Half the degree-weighted branch-point mass."""
    nu = mt._nu
    return Fraction(1, 2) * sum((mt.tree.degree(v) * nu[v] for v in range(mt.tree.n)), Fraction(0))


# ----------------------------------------------------------------------
# equivalence


def reduce(mt: MeasureTree) -> tuple[AlgebraicTree, dict[int, Fraction], dict[int, Fraction]]:
    """Strip parts of the tree that carry no mass.

    Leaves without mass are pruned repeatedly, then mass-free vertices of
    degree two are suppressed.  Returns the reduced tree with its atom and arc
    maps (re-indexed densely).
    """
    t = mt.tree
    alive = set(range(t.n))
    adj = {v: set(t.adjacency[v]) for v in range(t.n)}
    atoms = dict(mt.atom_mass)
    arcs = dict(mt.arc_mass)

    def massless_leaf(v: int) -> bool:
        if len(adj[v]) > 1 or atoms.get(v) or arcs.get(v):
            return False
        # keep the far end of an edge that still carries arc mass
        return not any(len(adj[u]) == 1 and arcs.get(u) for u in adj[v])

    stack = [v for v in alive if massless_leaf(v)]
    while stack and len(alive) > 1:
        v = stack.pop()
        if v not in alive or not massless_leaf(v):
            continue
        alive.discard(v)
        for w in adj.pop(v):
            adj[w].discard(v)
            if massless_leaf(w):
                stack.append(w)
    for v in sorted(alive):
        if len(adj[v]) == 2 and not atoms.get(v):
            a, b = adj[v]
            alive.discard(v)
            del adj[v]
            adj[a].discard(v)
            adj[b].discard(v)
            adj[a].add(b)
            adj[b].add(a)
    order = sorted(alive)
    index = {v: i for i, v in enumerate(order)}
    edges = {(index[a], index[b]) for a in order for b in adj[a] if a < b}
    tree = from_edges(sorted(edges), n=len(order))
    return (
        tree,
        {index[v]: m for v, m in atoms.items() if v in index},
        {index[v]: m for v, m in arcs.items() if v in index},
    )


def measure_canonical_form(mt: MeasureTree) -> CanonicalForm:
    """Code equal for two measure trees iff they are equivalent."""
    tree, atoms, arcs = reduce(mt)
    if tree.n == 2:
        # both leaf arcs sit on the single edge, so only their sum matters
        spread = sum(arcs.values(), Fraction(0))
        pair = sorted(str(atoms.get(v, 0)) for v in range(2))
        return CanonicalForm(f"edge[{pair[0]};{pair[1]};{spread}]")
    labels = [f"{atoms.get(v, 0)};{arcs.get(v, 0)}" for v in range(tree.n)]
    return tree.canonical_form(labels)


def equivalent(mt1: MeasureTree, mt2: MeasureTree) -> bool:
    return measure_canonical_form(mt1) == measure_canonical_form(mt2)


# ----------------------------------------------------------------------
# JSON boundary


def measure_tree_from_dict(data: Mapping) -> MeasureTree:
    tree, index = tree_from_dict(data)

    def remap(key: str) -> dict[int, Fraction]:
        raw = data.get(key, {}) or {}
        try:
            return {index[int(k)]: Fraction(str(v)) for k, v in raw.items()}
        except KeyError as exc:
            raise TreeError(f"{key} references unknown vertex {exc}") from exc
        except (ValueError, ZeroDivisionError) as exc:
            raise MeasureError(f"bad rational in {key}: {exc}") from exc

    return MeasureTree(tree, remap("atom_mass"), remap("arc_mass"))


def measure_tree_to_dict(mt: MeasureTree) -> dict:
    out = tree_to_dict(mt.tree)
    out["atom_mass"] = {str(v): str(m) for v, m in sorted(mt.atom_mass.items())}
    if mt.arc_mass:
        out["arc_mass"] = {str(v): str(m) for v, m in sorted(mt.arc_mass.items())}
    return out
