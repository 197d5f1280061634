"""Subtree-mass tensors, distance polynomials and empirical-process checks."""
from __future__ import annotations

import itertools
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .core_tree import AlgebraicTree
from .measure import MeasureTree, branch_point_distribution, distance_matrix
from .shapes import Location, Locator, SamplePoint, chunk_seeds

Tensor = tuple[tuple, ...]


class StatsError(ValueError):
    """Infeasible or invalid statistical requests."""


CONVENTIONS = ("open", "closed")


def _eta(loc: Locator, u: Location, v: Location, w: Location, convention: str):
    c = loc.median(u, v, w)
    at_c = loc.mt.atom(c[1]) if c[0] == "v" else Fraction(0)
    if u == c:
        return at_c if convention == "closed" else Fraction(0)
    mass = loc.component_mass(c, u)
    return mass + at_c if convention == "closed" else mass


def eta(mt: MeasureTree, u: SamplePoint, v: SamplePoint, w: SamplePoint, convention: str = "open"):
    """Mass of the component at the branch point of ``u, v, w`` that holds ``u``.

    Zero when ``u`` is itself the branch point.  With ``convention="closed"``
    the branch point's own atom is added and a point equal to the branch point
    gets exactly that atom.
    """
    if convention not in CONVENTIONS:
        raise StatsError(f"convention must be one of {CONVENTIONS}")
    loc = Locator(mt)
    return _eta(loc, loc.locate(u), loc.locate(v), loc.locate(w), convention)


def _tensor(loc: Locator, locs: Sequence[Location], convention: str) -> Tensor:
    out = []
    for i, j, k in itertools.combinations(range(len(locs)), 3):
        a, b, c = locs[i], locs[j], locs[k]
        out.append((_eta(loc, a, b, c, convention), _eta(loc, b, a, c, convention), _eta(loc, c, a, b, convention)))
    return tuple(out)


def mass_tensor(mt: MeasureTree, points: Sequence[SamplePoint], convention: str = "open") -> Tensor:
    """All triples ``(eta(ui,uj,uk), eta(uj,ui,uk), eta(uk,ui,uj))`` for ``i<j<k``."""
    if convention not in CONVENTIONS:
        raise StatsError(f"convention must be one of {CONVENTIONS}")
    loc = Locator(mt)
    return _tensor(loc, [loc.locate(p) for p in points], convention)


@dataclass
class EmpiricalDistribution:
    """Weights on a finite support; exact rationals or sample counts."""

    weights: dict
    size: int | None = None
    seed: int | None = None

    @property
    def exact(self) -> bool:
        return self.size is None

    def probabilities(self) -> dict:
        if self.exact:
            return dict(self.weights)
        return {k: c / self.size for k, c in self.weights.items()}

    def to_records(self) -> list[dict]:
        recs = []
        for key, w in sorted(self.weights.items(), key=lambda kv: repr(kv[0])):
            tensor = [[str(x) for x in triple] for triple in key]
            recs.append({"tensor": tensor, "weight": str(w) if self.exact else int(w)})
        return recs


def massdist(
    mt: MeasureTree,
    m: int,
    mode: str = "exact",
    *,
    N: int | None = None,
    seed: int | None = None,
    convention: str = "open",
    max_tuples: int = 2_000_000,
    threads: int = 1,
) -> EmpiricalDistribution:
    """Law of the subtree-mass tensor of ``m`` samples."""
    if convention not in CONVENTIONS:
        raise StatsError(f"convention must be one of {CONVENTIONS}")
    loc = Locator(mt)
    if mode == "exact":
        if not mt.is_atomic:
            raise StatsError("exact mode needs a purely atomic measure")
        atoms = sorted(mt.atom_mass.items())
        if len(atoms) ** m > max_tuples:
            raise StatsError(f"{len(atoms)}^{m} tuples exceed the enumeration limit")
        weights: dict[Tensor, Fraction] = {}
        for combo in itertools.product(atoms, repeat=m):
            prob = math.prod((p for _, p in combo), start=Fraction(1))
            key = _tensor(loc, [("v", v) for v, _ in combo], convention)
            weights[key] = weights.get(key, Fraction(0)) + prob
        return EmpiricalDistribution(weights)
    if mode != "sampled":
        raise StatsError(f"unknown mode {mode!r}")
    if N is None or N < 1 or seed is None:
        raise StatsError("sampled mode needs N >= 1 and a seed")

    def work(job):
        ss, size = job
        rng = np.random.default_rng(ss)
        counts: Counter = Counter()
        for _ in range(size):
            counts[_tensor(loc, loc.sample_tuple(rng, m), convention)] += 1
        return counts

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parts = list(pool.map(work, chunk_seeds(seed, N)))
    total: Counter = Counter()
    for part in parts:
        total.update(part)
    return EmpiricalDistribution(dict(total), N, seed)


def massdist3_by_branch_point(mt: MeasureTree, convention: str = "open") -> EmpiricalDistribution:
    """Exact ``m=3`` tensor law assembled vertex by vertex.

    For each vertex ``v`` the three samples either sit at ``v`` or fall into
    components of ``T \\ {v}``; ``v`` is their branch point exactly when no
    component receives two of them.  Independent of :func:`massdist`.
    """
    if not mt.is_atomic:
        raise StatsError("needs a purely atomic measure")
    t = mt.tree
    weights: dict[Tensor, Fraction] = {}
    for v in range(t.n):
        comps = mt.component_masses(v)
        atom = mt.atom(v)
        classes = [("at", atom)] + [(i, m) for i, m in enumerate(comps)]
        for trio in itertools.product(classes, repeat=3):
            used = [c for c, _ in trio if c != "at"]
            if len(used) != len(set(used)):
                continue
            prob = math.prod((m for _, m in trio), start=Fraction(1))
            if not prob:
                continue

            def entry(c, m):
                if c == "at":
                    return atom if convention == "closed" else Fraction(0)
                return m + atom if convention == "closed" else m

            e = [entry(c, m) for c, m in trio]
            key = ((e[0], e[1], e[2]),)
            weights[key] = weights.get(key, Fraction(0)) + prob
    return EmpiricalDistribution(weights)


# ----------------------------------------------------------------------
# empirical branch-point distribution and distance polynomials


def empirical_bpd(mt: MeasureTree, n: int, seed: int) -> dict[Location, Fraction]:
    """Branch points of ``n`` consecutive triples from ``3n`` i.i.d. samples."""
    if n < 1:
        raise StatsError("n must be at least 1")
    loc = Locator(mt)
    rng = np.random.default_rng(seed)
    pts = loc.sample(rng, 3 * n)
    counts = Counter(loc.median(*pts[3 * k : 3 * k + 3]) for k in range(n))
    return {x: Fraction(c, n) for x, c in counts.items()}


@dataclass(frozen=True)
class Lipschitz:
    """Bounded function of a distance matrix with a declared Lipschitz constant
    (with respect to the entrywise maximum norm)."""

    fn: Callable[[Sequence[Sequence]], float]
    constant: float

    def __call__(self, matrix):
        return self.fn(matrix)


def _as_callable(phi):
    return phi.fn if isinstance(phi, Lipschitz) else phi


def _empirical_matrix(loc: Locator, pts: Sequence[Location], n: int, m: int) -> list[list[Fraction]]:
    centers = Counter(loc.median(*pts[3 * k : 3 * k + 3]) for k in range(n))
    us = pts[:m]

    def interval_mass(a, b):
        return sum((c for x, c in centers.items() if loc.median(a, b, x) == x), 0)

    half = Fraction(1, 2)
    out = [[Fraction(0)] * m for _ in range(m)]
    for i, j in itertools.combinations(range(m), 2):
        a, b = us[i], us[j]
        if a == b:
            continue
        val = Fraction(interval_mass(a, b) - half * centers.get(a, 0) - half * centers.get(b, 0), n)
        out[i][j] = out[j][i] = val
    return out


def distance_polynomial(
    mt: MeasureTree,
    m: int,
    phi,
    mode: str = "exact",
    *,
    n: int | None = None,
    N: int | None = None,
    seed: int | None = None,
    max_tuples: int = 200_000,
):
    """Expectation of ``phi`` applied to the distance matrix of ``m`` samples.

    Exact mode uses the true branch-point distribution on atomic trees.  The
    empirical mode averages ``N`` draws of the matrix built from the branch
    points of ``3n`` samples, the first ``m`` of which are the matrix points.
    """
    f = _as_callable(phi)
    if mode == "exact":
        if not mt.is_atomic:
            raise StatsError("exact mode needs a purely atomic measure")
        atoms = sorted(mt.atom_mass.items())
        if len(atoms) ** m > max_tuples:
            raise StatsError("too many tuples for exact enumeration")
        nu = branch_point_distribution(mt).masses
        total = 0
        for combo in itertools.product(atoms, repeat=m):
            weight = math.prod((p for _, p in combo), start=Fraction(1))
            total += weight * f(distance_matrix(mt, [v for v, _ in combo], nu))
        return total
    if mode != "empirical":
        raise StatsError(f"unknown mode {mode!r}")
    if n is None or N is None or seed is None or n < 1 or N < 1:
        raise StatsError("empirical mode needs n, N and seed")
    if m > 3 * n:
        raise StatsError("need m <= 3n sample points")
    loc = Locator(mt)
    rng = np.random.default_rng(seed)
    acc = 0.0
    for _ in range(N):
        pts = loc.sample(rng, 3 * n)
        acc += float(f(_empirical_matrix(loc, pts, n, m)))
    return acc / N


class _IntervalGeometry:
    """Vectorised interval masses on the vertices of one tree."""

    def __init__(self, tree: AlgebraicTree):
        self.tree = tree
        idx = np.arange(tree.n)
        us, ws = np.triu_indices(tree.n)
        self.us, self.ws = us, ws
        self.tops = tree.lca_many(us, ws)
        self.parent = np.asarray(tree.parent)
        self.order = tree.preorder
        self.idx = idx

    def root_sums(self, values: np.ndarray) -> np.ndarray:
        """Sums along root paths, for a ``(..., n)`` array of vertex values."""
        out = values.astype(float).copy()
        for v in self.order[1:]:
            out[..., v] += out[..., self.parent[v]]
        return out

    def interval_values(self, values: np.ndarray) -> np.ndarray:
        """Totals of ``values`` over every interval ``[u, w]`` with ``u <= w``."""
        acc = self.root_sums(values)
        return acc[..., self.us] + acc[..., self.ws] - 2 * acc[..., self.tops] + values[..., self.tops]

    def subtree_sums(self, values: np.ndarray) -> np.ndarray:
        out = values.astype(float).copy()
        for v in reversed(self.order[1:]):
            out[..., self.parent[v]] += out[..., v]
        return out


@dataclass
class PolynomialTrials:
    """Per-trial comparison of empirical and exact distance matrices."""

    n: int
    phi_empirical: np.ndarray
    phi_exact: np.ndarray
    sup_dev: np.ndarray
    lipschitz: float

    @property
    def abs_error(self) -> np.ndarray:
        return np.abs(self.phi_empirical - self.phi_exact)

    @property
    def bound(self) -> np.ndarray:
        return 3 * self.lipschitz * self.sup_dev

    @property
    def bias(self) -> float:
        """Estimate of ``Phi_n - Phi`` from paired trials."""
        return float(np.mean(self.phi_empirical - self.phi_exact))


def polynomial_error_trials(mt: MeasureTree, m: int, phi: Lipschitz, n: int, trials: int, seed: int) -> PolynomialTrials:
    """Compare ``phi`` on empirical versus exact distance matrices, trial by trial.

    Each trial draws ``3n`` samples, builds the empirical branch-point law and
    records ``phi`` of both matrices at the first ``m`` samples together with
    the largest interval-mass deviation between the two branch-point laws.
    """
    if not mt.is_atomic:
        raise StatsError("needs a purely atomic measure")
    t = mt.tree
    geo = _IntervalGeometry(t)
    nu_exact = branch_point_distribution(mt).masses
    nu = np.array([float(nu_exact[v]) for v in range(t.n)])
    atoms = sorted(mt.atom_mass)
    probs = np.array([float(mt.atom_mass[v]) for v in atoms])
    probs /= probs.sum()
    rng = np.random.default_rng(seed)
    pos = {(int(u), int(w)): i for i, (u, w) in enumerate(zip(geo.us, geo.ws))}
    exact_int = geo.interval_values(nu)
    phi_n = np.empty(trials)
    phi_x = np.empty(trials)
    sups = np.empty(trials)
    for k in range(trials):
        pts = np.asarray(atoms)[rng.choice(len(atoms), size=3 * n, p=probs)]
        centers = t.branch_point_many(pts[0::3], pts[1::3], pts[2::3])
        nu_n = np.bincount(centers, minlength=t.n) / n
        emp_int = geo.interval_values(nu_n)
        sups[k] = np.max(np.abs(emp_int - exact_int))
        us = pts[:m]

        def matrix(ints, masses):
            out = [[0.0] * m for _ in range(m)]
            for i, j in itertools.combinations(range(m), 2):
                a, b = sorted((int(us[i]), int(us[j])))
                if a != b:
                    out[i][j] = out[j][i] = ints[pos[(a, b)]] - 0.5 * masses[a] - 0.5 * masses[b]
            return out

        phi_n[k] = phi(matrix(emp_int, nu_n))
        phi_x[k] = phi(matrix(exact_int, nu))
    return PolynomialTrials(n, phi_n, phi_x, sups, phi.constant)


# ----------------------------------------------------------------------
# VC dimension and Glivenko-Cantelli experiments

FAMILIES = {"intervals": 2, "subtree_components": 3}


def family_sets(tree: AlgebraicTree, family: str) -> set[int]:
    """Members of the set family, each encoded as a vertex bitmask."""
    sets: set[int] = set()
    if family == "intervals":
        for u in range(tree.n):
            for w in range(u, tree.n):
                sets.add(sum(1 << v for v in tree.interval(u, w)))
    elif family == "subtree_components":
        for v in range(tree.n):
            sets.add(1 << v)
            for w in tree.adjacency[v]:
                sets.add(sum(1 << x for x in tree.component(v, w)))
    else:
        raise StatsError(f"unknown family {family!r}")
    return sets


def vc_shatter_check(tree: AlgebraicTree, family: str, k: int) -> tuple[bool, tuple[int, ...] | None]:
    """Whether some ``k``-set of vertices is shattered, with a witness if so."""
    sets = family_sets(tree, family)
    for subset in itertools.combinations(range(tree.n), k):
        mask = sum(1 << v for v in subset)
        if len({s & mask for s in sets}) == 1 << k:
            return True, subset
    return False, None


@dataclass
class GCReport:
    family: str
    n: int
    sups: np.ndarray
    bound: float

    @property
    def mean(self) -> float:
        return float(np.mean(self.sups))

    @property
    def violations(self) -> int:
        return int(np.sum(self.sups > self.bound))

    def rows(self) -> list[tuple[int, int, float, float]]:
        return [(i, self.n, float(s), self.bound) for i, s in enumerate(self.sups)]


def glivenko_cantelli_sup(
    mt: MeasureTree, family: str, n: int, trials: int, seed: int, batch: int = 200
) -> GCReport:
    """Exact ``sup |mu(I) - mu_n(I)|`` over the family, for ``trials`` samples of size ``n``.

    The bound reported is ``96 sqrt(d/n)`` with ``d`` the family's VC dimension
    (2 for intervals, at most 3 for components).
    """
    if family not in FAMILIES:
        raise StatsError(f"unknown family {family!r}")
    if not mt.is_atomic:
        raise StatsError("needs a purely atomic measure")
    if n < 1 or trials < 1:
        raise StatsError("n and trials must be positive")
    t = mt.tree
    geo = _IntervalGeometry(t)
    mu = np.array([float(mt.atom(v)) for v in range(t.n)])
    rng = np.random.default_rng(seed)
    sups = []
    done = 0
    while done < trials:
        size = min(batch, trials - done)
        counts = rng.multinomial(n, mu / mu.sum(), size=size)
        delta = mu[None, :] - counts / n
        if family == "intervals":
            dev = np.abs(geo.interval_values(delta)).max(axis=1)
        else:
            sub = geo.subtree_sums(delta)
            dev = np.maximum(np.abs(sub[:, 1:]).max(axis=1, initial=0.0), np.abs(delta).max(axis=1))
        sups.append(dev)
        done += size
    bound = 96 * math.sqrt(FAMILIES[family] / n)
    return GCReport(family, n, np.concatenate(sups), bound)


def loglog_slope(ns: Sequence[int], values: Sequence[float]) -> float:
    slope, _ = np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(values, float)), 1)
    return float(slope)


# ----------------------------------------------------------------------
# comparisons


def wasserstein_linf(d1: EmpiricalDistribution, d2: EmpiricalDistribution, max_support: int = 400) -> float:
    """Optimal transport cost with the entrywise maximum as ground metric."""
    p1, p2 = d1.probabilities(), d2.probabilities()
    keys1, keys2 = list(p1), list(p2)
    if len(keys1) > max_support or len(keys2) > max_support:
        raise StatsError("support too large for the exact transport program")

    def flat(key) -> np.ndarray:
        return np.array([float(x) for x in itertools.chain.from_iterable(key)] if key and isinstance(key[0], tuple) else [float(x) for x in key])

    x1 = [flat(k) for k in keys1]
    x2 = [flat(k) for k in keys2]
    if any(a.shape != x1[0].shape for a in x1 + x2):
        raise StatsError("tensors of different sizes")
    a = np.array([float(p1[k]) for k in keys1])
    b = np.array([float(p2[k]) for k in keys2])
    if x1[0].size == 0:
        return 0.0
    cost = np.array([[np.max(np.abs(u - v)) for v in x2] for u in x1])
    n1, n2 = len(keys1), len(keys2)
    a_eq = np.zeros((n1 + n2, n1 * n2))
    for i in range(n1):
        a_eq[i, i * n2 : (i + 1) * n2] = 1
    for j in range(n2):
        a_eq[n1 + j, j::n2] = 1
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=np.concatenate([a / a.sum(), b / b.sum()]), bounds=(0, None), method="highs")
    if not res.success:
        raise StatsError(f"transport program failed: {res.message}")
    return max(0.0, float(res.fun))
