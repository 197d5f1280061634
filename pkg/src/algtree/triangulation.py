"""Finite sub-triangulations of the circle and the coding map to measure trees.

The circle has circumference one and is parameterised by arc length in
``[0, 1)``.  A finite sub-triangulation is stored as

* ``boundary``: strictly increasing exact positions of the chord endpoints,
* ``triangles``: index triples of the open triangles removed from the disc,
* ``segments``: ordered index pairs ``(i, j)`` for the removed circular
  segments, cut off by the chord ``{i, j}`` and containing the arc that runs
  counter-clockwise from ``boundary[i]`` to ``boundary[j]``.

The set ``C`` itself is the disc minus those open pieces, so every other face
of the chord arrangement is filled.  Two encodings are special: an empty
boundary is the whole disc, and a single boundary point with the segment
``(0, 0)`` is that point alone.

All combinatorics (faces, duals, masses) are exact.  Only
:func:`hausdorff_distance` and rendering use floating point.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core_tree import from_edges
from .measure import MeasureTree

RADIUS = 1 / (2 * math.pi)


class TriangulationError(ValueError):
    """Invalid sub-triangulation or an unsupported coding request."""


@dataclass(frozen=True)
class FiniteSubTriangulation:
    boundary: tuple[Fraction, ...]
    triangles: tuple[tuple[int, int, int], ...] = ()
    segments: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        pts = tuple(Fraction(p) for p in self.boundary)
        for p in pts:
            if not 0 <= p < 1:
                raise TriangulationError(f"boundary position {p} outside [0, 1)")
        if any(a >= b for a, b in zip(pts, pts[1:])):
            raise TriangulationError("boundary positions must be strictly increasing")
        object.__setattr__(self, "boundary", pts)
        object.__setattr__(self, "triangles", tuple(tuple(sorted(map(int, t))) for t in self.triangles))
        object.__setattr__(self, "segments", tuple((int(i), int(j)) for i, j in self.segments))
        k = len(pts)
        for idx in (*(i for t in self.triangles for i in t), *(i for s in self.segments for i in s)):
            if not 0 <= idx < k:
                raise TriangulationError(f"index {idx} outside the boundary list")

    @property
    def k(self) -> int:
        return len(self.boundary)

    def arc_length(self, i: int, j: int) -> Fraction:
        """Length of the arc from ``boundary[i]`` counter-clockwise to ``boundary[j]``."""
        d = (self.boundary[j] - self.boundary[i]) % 1
        return d if d else Fraction(1)

    @property
    def chords(self) -> frozenset[tuple[int, int]]:
        out = set()
        for a, b, c in self.triangles:
            out |= {(a, b), (b, c), (a, c)}
        for i, j in self.segments:
            if i != j:
                out.add((min(i, j), max(i, j)))
        return frozenset(out)

    @property
    def is_point(self) -> bool:
        return self.k == 1 and self.segments == ((0, 0),) and not self.triangles

    @property
    def is_disc(self) -> bool:
        return not self.triangles and not self.segments


# ----------------------------------------------------------------------
# faces of the chord arrangement


@dataclass(frozen=True)
class Face:
    """A face, listed as counter-clockwise darts ``(start, end, is_arc)``."""

    darts: tuple[tuple[int, int, bool], ...]

    @property
    def arcs(self) -> list[tuple[int, int]]:
        return [(a, b) for a, b, arc in self.darts if arc]

    @property
    def chords(self) -> list[tuple[int, int]]:
        return [(min(a, b), max(a, b)) for a, b, arc in self.darts if not arc]

    @property
    def corners(self) -> frozenset[int]:
        return frozenset(a for a, _, _ in self.darts)


def _crossing(c1: tuple[int, int], c2: tuple[int, int]) -> bool:
    a, b = c1
    c, d = c2
    if len({a, b, c, d}) < 4:
        return False
    return (a < c < b) != (a < d < b)


def faces(C: FiniteSubTriangulation) -> list[Face]:
    """Faces of the disc cut by the chords, found by walking a rotation system.

    Around each boundary point the outgoing darts are ordered by the
    counter-clockwise offset of their far end: the forward arc first, chords
    next, the backward arc last.  Walking a face means taking, after each dart,
    the predecessor of the reversed dart in that order, so arcs are only ever
    traversed counter-clockwise.
    """
    k = C.k
    if k == 0:
        return []
    chords = sorted(C.chords)
    around: list[list[tuple[Fraction, int, bool]]] = []
    for p in range(k):
        entries = [(Fraction(0), (p + 1) % k, True)]
        for a, b in chords:
            if p in (a, b):
                q = b if p == a else a
                entries.append(((C.boundary[q] - C.boundary[p]) % 1, q, False))
        entries.append((Fraction(1), (p - 1) % k, True))
        entries.sort(key=lambda e: e[0])
        around.append(entries)

    def next_dart(u: int, p: int, arc: bool) -> tuple[int, int, bool]:
        key = Fraction(1) if arc else (C.boundary[u] - C.boundary[p]) % 1
        entries = around[p]
        pos = next(i for i, e in enumerate(entries) if e[0] == key and e[1] == u)
        _, q, is_arc = entries[pos - 1]
        return p, q, is_arc

    seen: set[tuple[int, int, bool]] = set()
    out = []
    darts = [(p, (p + 1) % k, True) for p in range(k)]
    darts += [d for a, b in chords for d in ((a, b, False), (b, a, False))]
    for start in darts:
        if start in seen:
            continue
        walk = []
        d = start
        while d not in seen:
            seen.add(d)
            walk.append(d)
            d = next_dart(*d)
        out.append(Face(tuple(walk)))
    return out


# ----------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    faces: list[tuple[str, Face]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _classify(C: FiniteSubTriangulation, report: ValidationReport) -> None:
    triangles = {frozenset(t) for t in C.triangles}
    segments = set(C.segments)
    found_tri: set[frozenset[int]] = set()
    found_seg: set[tuple[int, int]] = set()
    for face in faces(C):
        arcs, chords = face.arcs, face.chords
        if not arcs:
            if len(chords) == 3 and face.corners in triangles:
                found_tri.add(face.corners)
                report.faces.append(("triangle", face))
            else:
                report.violations.append(
                    f"face with corners {sorted(face.corners)} is an unlisted polygon without boundary arcs"
                )
            continue
        if len(chords) == 1:
            # the arcs run from the chord's far end back to its start
            u, v = next((a, b) for a, b, arc in face.darts if not arc)
            if (v, u) in segments:
                found_seg.add((v, u))
                report.faces.append(("segment", face))
            else:
                report.faces.append(("cap", face))
        elif len(chords) == 2:
            report.faces.append(("strip", face))
        else:
            report.violations.append(
                f"filled face touching {len(chords)} chords has no triangle in the middle"
            )
    for t in triangles - found_tri:
        report.violations.append(f"listed triangle {sorted(t)} is not a face of the chord arrangement")
    for s in segments - found_seg:
        report.violations.append(f"listed segment {s} is not cut off by a single chord")


def validate(C: FiniteSubTriangulation) -> ValidationReport:
    """Check non-crossing chords, triangle faces and the middle-triangle condition."""
    report = ValidationReport()
    if C.is_disc or C.is_point:
        return report
    if any(i == j for i, j in C.segments):
        report.violations.append("a degenerate segment is only allowed as the single-point set")
        return report
    for t in C.triangles:
        if len(set(t)) != 3:
            report.violations.append(f"triangle {t} repeats a corner")
    if len(set(map(frozenset, C.triangles))) != len(C.triangles):
        report.violations.append("triangle listed twice")
    if len(set(C.segments)) != len(C.segments):
        report.violations.append("segment listed twice")
    chords = sorted(C.chords)
    for i, c1 in enumerate(chords):
        for c2 in chords[i + 1 :]:
            if _crossing(c1, c2):
                report.violations.append(f"chords {c1} and {c2} cross")
    if report.violations:
        return report
    _classify(C, report)
    return report


# ----------------------------------------------------------------------
# coding map


def code(C: FiniteSubTriangulation) -> MeasureTree:
    """Dual measure tree: triangles become branch points, segments atoms, caps diffuse leaves."""
    report = validate(C)
    if not report.ok:
        raise TriangulationError("; ".join(report.violations))
    if C.is_point:
        return MeasureTree(from_edges([], n=1), {0: 1})
    if C.is_disc:
        return MeasureTree(from_edges([(0, 1)]), {}, {1: 1})

    kinds: list[str] = []
    arc_len: list[Fraction] = []
    by_chord: dict[tuple[int, int], list[int]] = {}
    for kind, face in report.faces:
        idx = len(kinds)
        kinds.append(kind)
        arc_len.append(sum((C.arc_length(a, b) for a, b in face.arcs), Fraction(0)))
        for ch in face.chords:
            by_chord.setdefault(ch, []).append(idx)

    neighbours: dict[int, list[int]] = {i: [] for i in range(len(kinds))}
    for ch, pair in by_chord.items():
        if len(pair) != 2:
            raise TriangulationError(f"chord {ch} does not separate two faces")
        a, b = pair
        neighbours[a].append(b)
        neighbours[b].append(a)

    # strips merge into the edge between their two neighbours
    vertex: dict[int, int] = {}
    for i, kind in enumerate(kinds):
        if kind != "strip":
            vertex[i] = len(vertex)
    atoms: dict[int, Fraction] = {}
    arcs: dict[int, Fraction] = {}
    edges: list[tuple[int, int]] = []
    for i, kind in enumerate(kinds):
        if kind == "segment":
            atoms[vertex[i]] = arc_len[i]
        elif kind == "cap":
            arcs[vertex[i]] = arc_len[i]
    for ch, (a, b) in by_chord.items():
        if kinds[a] != "strip" and kinds[b] != "strip":
            edges.append((vertex[a], vertex[b]))
    for i, kind in enumerate(kinds):
        if kind != "strip":
            continue
        a, b = neighbours[i]
        ends = sorted((a, b), key=lambda f: kinds[f] != "segment")
        if kinds[ends[0]] != "segment":
            raise TriangulationError("diffuse mass between two triangles is not representable by a finite tree")
        leaf = vertex[ends[0]]
        arcs[leaf] = arcs.get(leaf, Fraction(0)) + arc_len[i]
        edges.append((vertex[a], vertex[b]))
    return MeasureTree(from_edges(edges, n=len(vertex)), atoms, arcs)


# ----------------------------------------------------------------------
# inverse construction


def _rooted(tree, root: int) -> tuple[list[int], dict[int, list[int]]]:
    order, kids = [root], {root: []}
    for v in order:
        for w in tree.adjacency[v]:
            if w not in kids:
                kids[v].append(w)
                kids[w] = []
                order.append(w)
    return order, kids


def decode(
    mt: MeasureTree,
    rho: int | None = None,
    planar_choice: Mapping[int, Sequence[int]] | None = None,
) -> FiniteSubTriangulation:
    """Sub-triangulation coding ``mt``.

    Vertices are visited depth first from the leaf ``rho``; the mass met
    before a branch point or atomic leaf fixes the first corner of its triangle
    or segment.  ``planar_choice`` maps a branch point to the order of its two
    children; by default children are ordered by subtree code, then mass.
    """
    if not mt.in_t2:
        raise TriangulationError("decode needs a binary tree with atoms only on leaves")
    t = mt.tree
    if t.n == 1:
        return FiniteSubTriangulation((Fraction(0),), (), ((0, 0),))
    leaves = sorted(t.leaves())
    if rho is None:
        rho = next((v for v in leaves if mt.atom(v) or mt.arc(v)), leaves[0])
    elif rho not in leaves:
        raise TriangulationError(f"root {rho} is not a leaf")
    atoms, arcs = mt.atom_mass, mt.arc_mass

    order, children = _rooted(t, rho)
    mass = {v: atoms.get(v, Fraction(0)) for v in order}
    for v in order:
        if v != rho:
            mass[v] += arcs.get(v, Fraction(0))
    for v in reversed(order):
        for w in children[v]:
            mass[v] += mass[w]
    codes: dict[int, str] = {}
    for v in reversed(order):
        below = ",".join(sorted(codes[w] for w in children[v]))
        codes[v] = f"{atoms.get(v, 0)};{arcs.get(v, 0)}({below})"

    triangles: list[tuple[Fraction, Fraction, Fraction]] = []
    segments: list[tuple[Fraction, Fraction]] = []
    pos = Fraction(0)
    stack = [rho]
    while stack:
        v = stack.pop()
        kids = list(children[v])
        if v == rho:
            if atoms.get(v):
                segments.append((pos, pos + atoms[v]))
            pos += atoms.get(v, Fraction(0)) + arcs.get(v, Fraction(0))
        elif not kids:
            pos += arcs.get(v, Fraction(0))
            if atoms.get(v):
                segments.append((pos, pos + atoms[v]))
                pos += atoms[v]
        if len(kids) == 2:
            if planar_choice is not None and v in planar_choice:
                kids = list(planar_choice[v])
                if sorted(kids) != sorted(children[v]):
                    raise TriangulationError(f"planar choice at {v} must list its two children")
            else:
                kids.sort(key=lambda w: (codes[w], mass[w], w))
            m1, m2 = mass[kids[0]], mass[kids[1]]
            if m1 and m2 and m1 + m2 < 1:
                triangles.append((pos, pos + m1, pos + m1 + m2))
        stack.extend(reversed(kids))

    corners = {p % 1 for tri in triangles for p in tri} | {p % 1 for s in segments for p in s}
    if not corners:
        return FiniteSubTriangulation(())
    boundary = sorted(corners)
    index = {p: i for i, p in enumerate(boundary)}
    return FiniteSubTriangulation(
        tuple(boundary),
        tuple(tuple(index[p % 1] for p in tri) for tri in triangles),
        tuple((index[a % 1], index[b % 1]) for a, b in segments),
    )


# ----------------------------------------------------------------------
# geometry


def _xy(positions) -> np.ndarray:
    theta = 2 * np.pi * np.asarray([float(p) for p in positions], dtype=float)
    return RADIUS * np.column_stack([np.cos(theta), np.sin(theta)])


def _point_segment_distance(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0:
        return np.linalg.norm(pts - a, axis=1)
    s = np.clip((pts - a) @ ab / denom, 0.0, 1.0)
    return np.linalg.norm(pts - (a + s[:, None] * ab), axis=1)


def _cross(o: np.ndarray, a: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return (a[0] - o[0]) * (pts[:, 1] - o[1]) - (a[1] - o[1]) * (pts[:, 0] - o[0])


def _holes(C: FiniteSubTriangulation) -> list[tuple[str, np.ndarray]]:
    """Removed pieces as point arrays: triangle corners or segment chord ends."""
    xy = _xy(C.boundary) if C.k else np.zeros((0, 2))
    out = []
    for tri in C.triangles:
        out.append(("triangle", xy[list(tri)]))
    for i, j in C.segments:
        out.append(("segment", xy[[i, j]]))
    return out


def distance_to_set(C: FiniteSubTriangulation, pts: np.ndarray) -> np.ndarray:
    """Euclidean distance from each point of the disc to the closed set ``C``."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    out = np.zeros(len(pts))
    if C.is_point:
        return np.linalg.norm(pts - _xy(C.boundary)[0], axis=1)
    for kind, corners in _holes(C):
        if kind == "triangle":
            a, b, c = corners
            # the corners run counter-clockwise, so the interior is on the left of each side
            inside = (_cross(a, b, pts) > 0) & (_cross(b, c, pts) > 0) & (_cross(c, a, pts) > 0)
            if inside.any():
                sub = pts[inside]
                out[inside] = np.minimum.reduce(
                    [_point_segment_distance(sub, p, q) for p, q in ((a, b), (b, c), (c, a))]
                )
        else:
            a, b = corners
            # removed side of the chord a -> b is the right-hand side (the ccw arc from a to b)
            inside = _cross(a, b, pts) < 0
            if inside.any():
                out[inside] = _point_segment_distance(pts[inside], a, b)
    return out


def _dyadic(length: float, tol: float) -> int:
    return 1 << max(0, math.ceil(math.log2(max(length / tol, 1.0))))


def sample_set(C: FiniteSubTriangulation, tol: float) -> np.ndarray:
    """Points of ``C`` on a grid of spacing ``tol`` plus its chords and arcs.

    Halving ``tol`` yields a superset, so distances computed from these points
    can only grow under refinement.
    """
    if C.is_point:
        return _xy(C.boundary)
    steps = math.ceil(RADIUS / tol)
    axis = np.arange(-steps, steps + 1) * tol
    gx, gy = np.meshgrid(axis, axis)
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    grid = grid[np.linalg.norm(grid, axis=1) <= RADIUS]
    parts = [grid[distance_to_set(C, grid) == 0]]
    xy = _xy(C.boundary) if C.k else np.zeros((0, 2))
    for a, b in C.chords:
        p, q = xy[a], xy[b]
        n = _dyadic(float(np.linalg.norm(q - p)), tol)
        s = np.arange(n + 1)[:, None] / n
        parts.append(p + s * (q - p))
    # circle points not cut away by a segment
    n = _dyadic(1.0, tol)
    circle = np.arange(n) / n
    removed = np.zeros(n, dtype=bool)
    for i, j in C.segments:
        lo, width = float(C.boundary[i]), float(C.arc_length(i, j))
        removed |= ((circle - lo) % 1 > 0) & ((circle - lo) % 1 < width)
    parts.append(_xy(circle[~removed]))
    return np.vstack(parts)


def hausdorff_distance(C1: FiniteSubTriangulation, C2: FiniteSubTriangulation, tol: float = 1e-3) -> float:
    """Symmetric Hausdorff distance between two sub-triangulations as planar sets.

    Distances to each set are exact; only the sup is taken over a sample of
    the other set with spacing ``tol``, so the result is accurate to ``tol``.
    """
    if tol <= 0:
        raise TriangulationError("tol must be positive")
    for C in (C1, C2):
        if not validate(C).ok:
            raise TriangulationError("hausdorff_distance needs valid sub-triangulations")
    one = distance_to_set(C2, sample_set(C1, tol)).max(initial=0.0)
    two = distance_to_set(C1, sample_set(C2, tol)).max(initial=0.0)
    return float(max(one, two))


# ----------------------------------------------------------------------
# uniform triangulations


def catalan(n: int) -> int:
    return math.comb(2 * n, n) // (n + 1)


def uniform_triangulation(n: int, seed: int) -> FiniteSubTriangulation:
    """Uniform triangulation of the regular ``n``-gon with corners at ``i/n``.

    The apex over the edge ``(lo, hi)`` is drawn with probability proportional
    to the number of triangulations of the two polygons it leaves behind,
    using exact integer arithmetic.
    """
    if n < 3:
        raise TriangulationError("need n >= 3")
    entropy = np.random.SeedSequence(seed).generate_state(4)
    rng = random.Random(int.from_bytes(entropy.tobytes(), "little"))
    cat = [catalan(i) for i in range(n)]
    triangles = []
    stack = [(0, n - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        size = hi - lo + 1
        ticket = rng.randrange(cat[size - 2])
        for j in range(lo + 1, hi):
            w = cat[j - lo - 1] * cat[hi - j - 1]
            if ticket < w:
                break
            ticket -= w
        triangles.append((lo, j, hi))
        stack.append((j, hi))
        stack.append((lo, j))
    return FiniteSubTriangulation(tuple(Fraction(i, n) for i in range(n)), tuple(triangles))


def polygon_triangulations(n: int) -> Iterable[FiniteSubTriangulation]:
    """All triangulations of the regular ``n``-gon."""
    if n < 3:
        raise TriangulationError("need n >= 3")

    def tri(lo: int, hi: int):
        if hi - lo < 2:
            yield ()
            return
        for j in range(lo + 1, hi):
            for left in tri(lo, j):
                for right in tri(j, hi):
                    yield ((lo, j, hi),) + left + right

    bound = tuple(Fraction(i, n) for i in range(n))
    for ts in tri(0, n - 1):
        yield FiniteSubTriangulation(bound, ts)


# ----------------------------------------------------------------------
# JSON and SVG


def triangulation_from_dict(data: Mapping) -> FiniteSubTriangulation:
    try:
        boundary = tuple(Fraction(str(p)) for p in data.get("boundary", []))
    except (ValueError, ZeroDivisionError) as exc:
        raise TriangulationError(f"bad boundary position: {exc}") from exc
    return FiniteSubTriangulation(
        boundary,
        tuple(tuple(t) for t in data.get("triangles", [])),
        tuple(tuple(s) for s in data.get("segments", [])),
    )


def triangulation_to_dict(C: FiniteSubTriangulation) -> dict:
    return {
        "boundary": [str(p) for p in C.boundary],
        "triangles": [list(t) for t in C.triangles],
        "segments": [list(s) for s in C.segments],
    }


def render_svg(C: FiniteSubTriangulation, size: int = 400, dual: bool = False) -> str:
    """SVG 1.1 drawing: the circle, shaded segments, chords and optionally the dual tree."""
    scale = 0.45 * size / RADIUS
    half = size / 2

    def pt(xy) -> str:
        return f"{half + scale * xy[0]:.3f},{half - scale * xy[1]:.3f}"

    xy = _xy(C.boundary) if C.k else np.zeros((0, 2))
    r = scale * RADIUS
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<circle cx="{half}" cy="{half}" r="{r:.3f}" fill="#dddddd" stroke="black" stroke-width="1"/>',
    ]
    for i, j in C.segments:
        if C.is_point:
            lines.append(f'<circle cx="{half}" cy="{half}" r="{r:.3f}" fill="white" stroke="black"/>')
            continue
        large = 1 if C.arc_length(i, j) > Fraction(1, 2) else 0
        a, b = pt(xy[i]).split(","), pt(xy[j]).split(",")
        lines.append(
            f'<path d="M {a[0]} {a[1]} A {r:.3f} {r:.3f} 0 {large} 0 {b[0]} {b[1]} Z" '
            'fill="white" stroke="none"/>'
        )
    for tri in C.triangles:
        corners = " ".join(pt(xy[i]) for i in tri)
        lines.append(f'<polygon points="{corners}" fill="white" stroke="none"/>')
    for a, b in sorted(C.chords):
        p, q = pt(xy[a]).split(","), pt(xy[b]).split(",")
        lines.append(f'<line x1="{p[0]}" y1="{p[1]}" x2="{q[0]}" y2="{q[1]}" stroke="black" stroke-width="1.5"/>')
    if dual and C.triangles:
        lines.extend(_dual_overlay(C, xy, pt))
    for p in xy:
        c = pt(p).split(",")
        lines.append(f'<circle cx="{c[0]}" cy="{c[1]}" r="2" fill="black"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _dual_overlay(C: FiniteSubTriangulation, xy: np.ndarray, pt) -> list[str]:
    report = validate(C)
    centre = {}
    for idx, (kind, face) in enumerate(report.faces):
        corners = xy[sorted(face.corners)]
        if kind == "triangle":
            centre[idx] = corners.mean(axis=0)
        else:
            mids = [float(C.boundary[a] + C.arc_length(a, b) / 2) for a, b in face.arcs]
            centre[idx] = 0.85 * _xy([mids[len(mids) // 2]])[0]
    by_chord: dict[tuple[int, int], list[int]] = {}
    for idx, (_, face) in enumerate(report.faces):
        for ch in face.chords:
            by_chord.setdefault(ch, []).append(idx)
    out = []
    for a, b in by_chord.values():
        p, q = pt(centre[a]).split(","), pt(centre[b]).split(",")
        out.append(
            f'<line x1="{p[0]}" y1="{p[1]}" x2="{q[0]}" y2="{q[1]}" stroke="#c0392b" '
            'stroke-width="1" stroke-dasharray="4,3"/>'
        )
    return out
