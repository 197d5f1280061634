"""Finite algebraic trees.

A finite tree is stored as an adjacency structure on dense integer vertices
``0..n-1``.  The branch point (median) of three vertices is answered through a
rooted representation: an Euler tour with a sparse table gives constant-time
lowest common ancestors, and the median of ``x, y, z`` is the deepest of the
three pairwise ancestors.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np


class TreeError(ValueError):
    """Raised for malformed trees or unknown vertices."""


@dataclass(frozen=True, order=True)
class CanonicalForm:
    """Isomorphism-invariant encoding of a (possibly annotated) tree."""

    code: str

    def digest(self) -> str:
        import hashlib

        return hashlib.sha256(self.code.encode()).hexdigest()


class AlgebraicTree:
    """Immutable finite tree with branch-point, interval and order queries.

    Build instances with :func:`from_edges`.
    """

    def __init__(self, n: int, adjacency: Sequence[Sequence[int]]):
        if n < 1:
            raise TreeError("a tree needs at least one vertex")
        self.n = n
        self.adjacency: tuple[tuple[int, ...], ...] = tuple(
            tuple(sorted(a)) for a in adjacency
        )
        self.root_index = 0
        self._build_rooted()
        self._rooted_cache: dict[int, list[int]] = {}

    # ------------------------------------------------------------------
    # rooted structure
    def _build_rooted(self) -> None:
        n = self.n
        parent = [-1] * n
        depth = [0] * n
        order: list[int] = []
        tin = [0] * n
        tout = [0] * n
        euler: list[int] = []
        first = [0] * n
        seen = [False] * n
        seen[0] = True
        # iterative DFS producing an Euler tour and entry/exit times
        stack: list[tuple[int, int]] = [(0, 0)]
        clock = 0
        first[0] = 0
        euler.append(0)
        tin[0] = clock
        clock += 1
        order.append(0)
        while stack:
            v, i = stack[-1]
            nbrs = self.adjacency[v]
            if i < len(nbrs):
                stack[-1] = (v, i + 1)
                w = nbrs[i]
                if w == parent[v]:
                    continue
                if seen[w]:
                    raise TreeError("edges contain a cycle")
                seen[w] = True
                parent[w] = v
                depth[w] = depth[v] + 1
                first[w] = len(euler)
                euler.append(w)
                tin[w] = clock
                clock += 1
                order.append(w)
                stack.append((w, 0))
            else:
                stack.pop()
                tout[v] = clock
                if stack:
                    euler.append(stack[-1][0])
        if not all(seen):
            raise TreeError("edges do not form a connected graph")
        self.parent = parent
        self.depth = depth
        self.preorder = order
        self.tin = tin
        self.tout = tout
        self._first = first
        self._euler = euler
        # sparse table over the Euler tour: entry k holds, for every start
        # position, the shallowest vertex among the next 2**k tour entries
        row = euler
        table = [row]
        span = 1
        while 2 * span <= len(euler):
            nxt = [
                a if depth[a] <= depth[b] else b
                for a, b in zip(row[:-span], row[span:])
            ]
            table.append(nxt)
            row = nxt
            span *= 2
        self._table = table

    @cached_property
    def _np_depth(self) -> np.ndarray:
        return np.asarray(self.depth, dtype=np.int64)

    @cached_property
    def _np_first(self) -> np.ndarray:
        return np.asarray(self._first, dtype=np.int64)

    @cached_property
    def _np_table(self) -> list[np.ndarray]:
        return [np.asarray(r, dtype=np.int64) for r in self._table]

    # ------------------------------------------------------------------
    def _check(self, *vs: int) -> None:
        for v in vs:
            if not (isinstance(v, (int, np.integer)) and 0 <= v < self.n):
                raise TreeError(f"unknown vertex {v!r}")

    def vertices(self) -> range:
        return range(self.n)

    def lca(self, x: int, y: int) -> int:
        """Lowest common ancestor with respect to the internal root."""
        a, b = self._first[x], self._first[y]
        if a > b:
            a, b = b, a
        k = (b - a + 1).bit_length() - 1
        row = self._table[k]
        u, v = row[a], row[b - (1 << k) + 1]
        return u if self.depth[u] <= self.depth[v] else v

    def lca_many(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`lca` over equally shaped integer arrays."""
        a = self._np_first[xs]
        b = self._np_first[ys]
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        length = hi - lo + 1
        k = np.floor(np.log2(length)).astype(np.int64)
        out = np.empty(lo.shape, dtype=np.int64)
        for level in np.unique(k):
            mask = k == level
            row = self._np_table[level]
            u = row[lo[mask]]
            v = row[hi[mask] - (1 << int(level)) + 1]
            out[mask] = np.where(self._np_depth[u] <= self._np_depth[v], u, v)
        return out

    def branch_point(self, x: int, y: int, z: int) -> int:
        """The unique vertex lying on all three paths between ``x, y, z``."""
        self._check(x, y, z)
        a, b, c = self.lca(x, y), self.lca(y, z), self.lca(x, z)
        best = a
        if self.depth[b] > self.depth[best]:
            best = b
        if self.depth[c] > self.depth[best]:
            best = c
        return best

    def branch_point_many(self, xs: np.ndarray, ys: np.ndarray, zs: np.ndarray) -> np.ndarray:
        a = self.lca_many(xs, ys)
        b = self.lca_many(ys, zs)
        c = self.lca_many(xs, zs)
        d = self._np_depth
        best = np.where(d[b] > d[a], b, a)
        return np.where(d[c] > d[best], c, best)

    def median_table(self) -> np.ndarray:
        """Full ``n x n x n`` table of branch points (small trees only)."""
        idx = np.arange(self.n)
        xs, ys = np.meshgrid(idx, idx, indexing="ij")
        pair = self.lca_many(xs, ys)
        d = self._np_depth
        xy = pair[:, :, None]
        yz = pair[None, :, :]
        xz = pair[:, None, :]
        xy, yz, xz = np.broadcast_arrays(xy, yz, xz)
        best = np.where(d[yz] > d[xy], yz, xy)
        return np.where(d[xz] > d[best], xz, best)

    def distance(self, x: int, y: int) -> int:
        """Number of edges on the path between ``x`` and ``y``."""
        return self.depth[x] + self.depth[y] - 2 * self.depth[self.lca(x, y)]

    def is_ancestor(self, a: int, b: int) -> bool:
        """Whether ``a`` lies on the path from the internal root to ``b``."""
        return self.tin[a] <= self.tin[b] and self.tout[b] <= self.tout[a]

    def interval(self, x: int, y: int) -> list[int]:
        """Vertices of the path from ``x`` to ``y``, in order."""
        self._check(x, y)
        top = self.lca(x, y)
        left = [x]
        while left[-1] != top:
            left.append(self.parent[left[-1]])
        right = [y]
        while right[-1] != top:
            right.append(self.parent[right[-1]])
        return left + right[-2::-1]

    def step_toward(self, x: int, y: int) -> int:
        """Neighbour of ``x`` on the path to ``y`` (``x != y``)."""
        if self.is_ancestor(x, y):
            # climb from y to the child of x
            target = self.depth[x] + 1
            v = y
            while self.depth[v] > target:
                v = self.parent[v]
            return v
        return self.parent[x]

    def component(self, x: int, y: int) -> frozenset[int]:
        """Vertex set of the component of ``T \\ {x}`` containing ``y``.

        By convention the component of ``x`` itself is ``{x}``.
        """
        self._check(x, y)
        if x == y:
            return frozenset([x])
        start = self.step_toward(x, y)
        seen = {x, start}
        queue = deque([start])
        while queue:
            v = queue.popleft()
            for w in self.adjacency[v]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        seen.discard(x)
        return frozenset(seen)

    def degree(self, v: int) -> int:
        self._check(v)
        return len(self.adjacency[v])

    def leaves(self) -> frozenset[int]:
        return frozenset(v for v in range(self.n) if len(self.adjacency[v]) <= 1)

    def branch_points(self) -> frozenset[int]:
        return frozenset(v for v in range(self.n) if len(self.adjacency[v]) >= 3)

    def edges(self) -> frozenset[tuple[int, int]]:
        return frozenset(
            (v, w) for v in range(self.n) for w in self.adjacency[v] if v < w
        )

    # ------------------------------------------------------------------
    # order structure relative to a root rho, computed by walking parent
    # pointers of a tree re-rooted at rho (independent of the LCA tables)
    def _parents_from(self, rho: int) -> list[int]:
        cached = self._rooted_cache.get(rho)
        if cached is not None:
            return cached
        par = [-1] * self.n
        par[rho] = rho
        queue = deque([rho])
        while queue:
            v = queue.popleft()
            for w in self.adjacency[v]:
                if par[w] == -1:
                    par[w] = v
                    queue.append(w)
        self._rooted_cache[rho] = par
        return par

    def _ancestors_from(self, rho: int, y: int) -> list[int]:
        par = self._parents_from(rho)
        chain = [y]
        while chain[-1] != rho:
            chain.append(par[chain[-1]])
        return chain

    def is_le(self, rho: int, x: int, y: int) -> bool:
        """``x <= y`` in the order rooted at ``rho``, i.e. ``x`` lies on ``[rho, y]``."""
        self._check(rho, x, y)
        return x in self._ancestors_from(rho, y)

    def meet(self, rho: int, x: int, y: int) -> int:
        """Greatest common lower bound of ``x`` and ``y`` in the ``rho`` order."""
        self._check(rho, x, y)
        below_x = set(self._ancestors_from(rho, x))
        for v in self._ancestors_from(rho, y):
            if v in below_x:
                return v
        raise AssertionError("unreachable: rho is a common lower bound")

    def branch_point_from_order(self, rho: int, x: int, y: int, z: int) -> int:
        """Branch point recovered as the largest of the three pairwise meets."""
        candidates = [self.meet(rho, x, y), self.meet(rho, y, z), self.meet(rho, z, x)]
        best = candidates[0]
        for c in candidates[1:]:
            if self.is_le(rho, best, c):
                best = c
        return best

    # ------------------------------------------------------------------
    def centers(self) -> list[int]:
        """The one or two vertices minimising eccentricity."""
        if self.n <= 2:
            return list(range(self.n))
        deg = [len(a) for a in self.adjacency]
        layer = [v for v in range(self.n) if deg[v] <= 1]
        remaining = self.n
        while remaining > 2:
            remaining -= len(layer)
            nxt = []
            for v in layer:
                for w in self.adjacency[v]:
                    deg[w] -= 1
                    if deg[w] == 1:
                        nxt.append(w)
            layer = nxt
        return sorted(layer)

    def rooted_code(self, root: int, labels: Sequence[str] | None = None) -> str:
        """Minimal nested-parenthesis code of the tree hanging from ``root``."""
        par = self._parents_from(root)
        order: list[int] = []
        queue = deque([root])
        while queue:
            v = queue.popleft()
            order.append(v)
            for w in self.adjacency[v]:
                if par[w] == v and w != v:
                    queue.append(w)
        codes: dict[int, list[str]] = {v: [] for v in order}
        result = ""
        for v in reversed(order):
            inner = "".join(sorted(codes[v]))
            tag = labels[v] if labels is not None else ""
            code = f"({tag}{inner})"
            if v == root:
                result = code
            else:
                codes[par[v]].append(code)
        return result

    def canonical_form(self, labels: Sequence[str] | None = None) -> CanonicalForm:
        """Code equal for two trees iff they are isomorphic (respecting labels)."""
        if labels is not None:
            for tag in labels:
                if any(ch in "()" for ch in tag):
                    raise TreeError("labels may not contain parentheses")
        return CanonicalForm(min(self.rooted_code(c, labels) for c in self.centers()))

    def __repr__(self) -> str:
        return f"AlgebraicTree(n={self.n}, edges={sorted(self.edges())})"


def from_edges(edges: Iterable[Sequence[int]], n: int | None = None) -> AlgebraicTree:
    """Build a tree on vertices ``0..n-1`` from an edge list.

    ``n`` defaults to one more than the largest vertex id (or 1 when there are
    no edges).  Raises :class:`TreeError` unless the edges form a spanning tree.
    """
    pairs = [tuple(int(v) for v in e) for e in edges]
    for e in pairs:
        if len(e) != 2:
            raise TreeError(f"edge {e} is not a pair")
        if e[0] == e[1]:
            raise TreeError(f"self-loop at {e[0]}")
        if min(e) < 0:
            raise TreeError("vertex ids must be nonnegative")
    if n is None:
        n = 1 + max((max(e) for e in pairs), default=0)
    if len(pairs) != n - 1:
        raise TreeError(f"a tree on {n} vertices has {n - 1} edges, got {len(pairs)}")
    adjacency: list[set[int]] = [set() for _ in range(n)]
    for a, b in pairs:
        if a >= n or b >= n:
            raise TreeError(f"edge {(a, b)} references a vertex outside 0..{n - 1}")
        if b in adjacency[a]:
            raise TreeError(f"duplicate edge {(a, b)}")
        adjacency[a].add(b)
        adjacency[b].add(a)
    return AlgebraicTree(n, [sorted(a) for a in adjacency])


# ----------------------------------------------------------------------
# axiom checking


@dataclass
class AxiomReport:
    """Violations found by :func:`verify_axioms`, keyed by property name."""

    checked: int = 0
    violations: dict[str, list[tuple[int, ...]]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not any(self.violations.values())

    def add(self, name: str, witnesses: Iterable[tuple[int, ...]], limit: int = 10) -> None:
        found = self.violations.setdefault(name, [])
        for w in witnesses:
            if len(found) >= limit:
                break
            found.append(tuple(int(x) for x in w))


def _as_table(source: AlgebraicTree | np.ndarray | Callable[[int, int, int], int], n: int | None) -> np.ndarray:
    if isinstance(source, AlgebraicTree):
        return source.median_table()
    if isinstance(source, np.ndarray):
        return source
    if n is None:
        raise TreeError("vertex count required for a callable branch-point map")
    table = np.empty((n, n, n), dtype=np.int64)
    for x, y, z in itertools.product(range(n), repeat=3):
        table[x, y, z] = source(x, y, z)
    return table


def _witnesses(mask: np.ndarray) -> list[tuple[int, ...]]:
    return [tuple(w) for w in np.argwhere(mask)[:10]]


def verify_axioms(
    source: AlgebraicTree | np.ndarray | Callable[[int, int, int], int],
    mode: str = "exhaustive",
    *,
    n: int | None = None,
    k: int = 10_000,
    seed: int | None = None,
) -> AxiomReport:
    """Check the four branch-point axioms and the interval identities.

    ``source`` is a tree, a precomputed ``n x n x n`` table, or a callable
    ``c(x, y, z)``.  ``mode="exhaustive"`` checks every tuple; ``"sampled"``
    checks ``k`` random tuples drawn with ``seed`` (trees only).
    """
    if mode == "sampled":
        if not isinstance(source, AlgebraicTree):
            raise TreeError("sampled mode needs a tree")
        if seed is None:
            raise TreeError("sampled mode needs a seed")
        return _verify_sampled(source, k, seed)
    if mode != "exhaustive":
        raise TreeError(f"unknown mode {mode!r}")
    c = _as_table(source, n)
    size = c.shape[0]
    report = AxiomReport(checked=size**4)
    idx = np.arange(size)
    x = idx[:, None, None]
    y = idx[None, :, None]
    z = idx[None, None, :]
    # symmetry under all argument permutations
    sym = np.zeros(c.shape, dtype=bool)
    for perm in itertools.permutations(range(3)):
        sym |= c != np.transpose(c, perm)
    report.add("BPM1", _witnesses(sym))
    diag = c[idx[:, None], idx[None, :], idx[None, :]]
    report.add("BPM2", _witnesses(diag != idx[None, :]))
    nested = c[x, y, c]
    report.add("BPM3", _witnesses(nested != c))
    x1 = idx[:, None, None, None]
    x2 = idx[None, :, None, None]
    x3 = idx[None, None, :, None]
    x4 = idx[None, None, None, :]
    lhs = c[x1, x2, x3]
    bpm4 = (lhs != c[x1, x2, x4]) & (lhs != c[x1, x3, x4]) & (lhs != c[x2, x3, x4])
    report.add("BPM4", _witnesses(bpm4))
    # interval membership: member[a, b, w] iff w in [a, b]
    w = idx[None, None, :]
    member = c[idx[:, None, None], idx[None, :, None], w] == w
    xy = member[:, :, None, :]              # indexed [x, y, z, w]
    yz = member[None, :, :, :]
    xz = member[:, None, :, :]
    cy = member[c, idx[None, :, None]]      # [c(x,y,z), y] per (x, y, z)
    report.add("interval-intersection", _witnesses(((xy & yz) != cy).any(axis=-1)))
    open_c = cy & (idx[None, None, None, :] != c[..., None])
    union_bad = ((xy | yz) != (xz | open_c)) | (xz & open_c)
    report.add("interval-union", _witnesses(union_bad.any(axis=-1)))
    return report


def _verify_sampled(tree: AlgebraicTree, k: int, seed: int) -> AxiomReport:
    rng = np.random.default_rng(seed)
    report = AxiomReport(checked=k)
    c = tree.branch_point
    bad: dict[str, list[tuple[int, ...]]] = {}
    for _ in range(k):
        x1, x2, x3, x4 = (int(v) for v in rng.integers(0, tree.n, size=4))
        m = c(x1, x2, x3)
        if any(c(*p) != m for p in itertools.permutations((x1, x2, x3))):
            bad.setdefault("BPM1", []).append((x1, x2, x3))
        if c(x1, x2, x2) != x2:
            bad.setdefault("BPM2", []).append((x1, x2))
        if c(x1, x2, m) != m:
            bad.setdefault("BPM3", []).append((x1, x2, x3))
        if m not in (c(x1, x2, x4), c(x1, x3, x4), c(x2, x3, x4)):
            bad.setdefault("BPM4", []).append((x1, x2, x3, x4))
        p12, p23, p13 = (set(tree.interval(a, b)) for a, b in ((x1, x2), (x2, x3), (x1, x3)))
        if p12 & p23 != set(tree.interval(m, x2)):
            bad.setdefault("interval-intersection", []).append((x1, x2, x3))
        open_part = set(tree.interval(m, x2)) - {m}
        if (p12 | p23) != (p13 | open_part) or p13 & open_part:
            bad.setdefault("interval-union", []).append((x1, x2, x3))
    for name in ("BPM1", "BPM2", "BPM3", "BPM4", "interval-intersection", "interval-union"):
        report.add(name, bad.get(name, []))
    return report


# ----------------------------------------------------------------------
# morphisms


def is_homomorphism(f: Mapping[int, int] | Sequence[int], source: AlgebraicTree, target: AlgebraicTree) -> bool:
    """Whether ``f`` commutes with the branch-point maps of both trees."""
    image = np.asarray([f[v] for v in range(source.n)], dtype=np.int64)
    if image.size and (image.min() < 0 or image.max() >= target.n):
        raise TreeError("map leaves the target vertex set")
    src = source.median_table()
    if target.n ** 3 <= 4_000_000:
        tgt = target.median_table()
        mapped = tgt[image[:, None, None], image[None, :, None], image[None, None, :]]
    else:
        fx, fy, fz = np.meshgrid(image, image, image, indexing="ij")
        mapped = target.branch_point_many(fx.ravel(), fy.ravel(), fz.ravel()).reshape(src.shape)
    return bool(np.array_equal(image[src], mapped))


def is_isomorphism(f: Mapping[int, int] | Sequence[int], source: AlgebraicTree, target: AlgebraicTree) -> bool:
    image = [f[v] for v in range(source.n)]
    return source.n == target.n and len(set(image)) == source.n and is_homomorphism(f, source, target)


def canonical_form(tree: AlgebraicTree, labels: Sequence[str] | None = None) -> CanonicalForm:
    return tree.canonical_form(labels)


# ----------------------------------------------------------------------
# JSON boundary


def tree_from_dict(data: Mapping) -> tuple[AlgebraicTree, dict[int, int]]:
    """Parse ``{"vertices": [{"id": ..}], "edges": [[a, b], ..]}``.

    Returns the tree and the map from external ids to dense internal ids.
    """
    try:
        ids = [int(v["id"]) for v in data["vertices"]]
        raw_edges = [(int(a), int(b)) for a, b in data["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise TreeError(f"malformed tree JSON: {exc}") from exc
    if len(set(ids)) != len(ids) or not ids:
        raise TreeError("vertex ids must be distinct and non-empty")
    if any(i < 0 for i in ids):
        raise TreeError("vertex ids must be nonnegative")
    index = {ext: i for i, ext in enumerate(sorted(ids))}
    try:
        edges = [(index[a], index[b]) for a, b in raw_edges]
    except KeyError as exc:
        raise TreeError(f"edge references unknown vertex {exc}") from exc
    return from_edges(edges, n=len(ids)), index


def tree_to_dict(tree: AlgebraicTree) -> dict:
    return {
        "vertices": [{"id": v} for v in range(tree.n)],
        "edges": [list(e) for e in sorted(tree.edges())],
    }
