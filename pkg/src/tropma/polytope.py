"""Exact rational convex polytopes kept in vertex and halfspace form."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import factorial
from typing import Iterable, Sequence

from ._exact import (InvalidInput, Vec, det, dot, linprog, normalize_hyperplane,
                     nullspace, rank, rref, sub, to_fraction, vec)

Halfspace = tuple[Vec, Fraction]


def _hull_full(points: list[Vec]):
    """Beneath-beyond hull of full-dimensional points in R^k.

    Returns (boundary simplices as index tuples, interior point). Each boundary
    simplex carries an outward normal and offset.
    """
    k = len(points[0])
    # initial simplex
    chosen = [0]
    for i in range(1, len(points)):
        cand = chosen + [i]
        if rank([sub(points[j], points[chosen[0]]) for j in cand[1:]]) == len(cand) - 1:
            chosen = cand
            if len(chosen) == k + 1:
                break
    if len(chosen) != k + 1:
        raise InvalidInput("points are not full-dimensional")
    center = tuple(sum(points[i][d] for i in chosen) / (k + 1) for d in range(k))

    def make(idx: tuple[int, ...]):
        base = points[idx[0]]
        rows = [sub(points[j], base) for j in idx[1:]]
        normal = nullspace(rows, k)[0]
        off = dot(normal, base)
        if dot(normal, center) > off:
            normal = tuple(-x for x in normal)
            off = -off
        return normal, off

    facets: dict[tuple[int, ...], tuple[Vec, Fraction]] = {}
    for drop in range(k + 1):
        idx = tuple(sorted(chosen[:drop] + chosen[drop + 1:]))
        facets[idx] = make(idx)
    in_simplex = set(chosen)
    for p in range(len(points)):
        if p in in_simplex:
            continue
        x = points[p]
        visible = [f for f, (a, b) in facets.items() if dot(a, x) > b]
        if not visible:
            continue
        ridge_count: dict[tuple[int, ...], int] = {}
        for f in visible:
            for r in combinations(f, k - 1):
                ridge_count[r] = ridge_count.get(r, 0) + 1
        for f in visible:
            del facets[f]
        for r, cnt in ridge_count.items():
            if cnt == 1:
                idx = tuple(sorted(r + (p,)))
                facets[idx] = make(idx)
    return facets, center


@dataclass(frozen=True)
class Polytope:
    """A bounded convex polytope in Q^dim.

    ``halfspaces`` lists pairs (a, b) meaning <a, x> <= b; equalities of a
    lower-dimensional polytope appear as two opposite halfspaces.
    """

    dim: int
    vertices: tuple[Vec, ...]
    halfspaces: tuple[Halfspace, ...]
    affine_dim: int
    _facets: tuple = field(default=(), repr=False, compare=False)
    _volume: Fraction = field(default=Fraction(0), repr=False, compare=False)

    # construction ------------------------------------------------------------

    @classmethod
    def from_points(cls, points: Iterable[Sequence], dim: int | None = None) -> "Polytope":
        pts = sorted(set(vec(p) for p in points))
        if not pts:
            if dim is None:
                raise InvalidInput("empty point set needs an explicit dimension")
            return cls.empty(dim)
        n = len(pts[0])
        if dim is not None and dim != n:
            raise InvalidInput("point dimension mismatch")
        if any(len(p) != n for p in pts):
            raise InvalidInput("ragged point list")
        p0 = pts[0]
        diffs = [sub(p, p0) for p in pts[1:]]
        if diffs:
            _, pivots = rref(diffs)
        else:
            pivots = []
        r = len(pivots)
        eq_normals = nullspace(diffs, n) if diffs else nullspace([], n)
        halfspaces: list[Halfspace] = []
        for nu in eq_normals:
            a, b = normalize_hyperplane(nu, dot(nu, p0))
            halfspaces.append((a, b))
            halfspaces.append((tuple(-x for x in a), -b))
        if r == 0:
            return cls(n, (p0,), tuple(sorted(halfspaces)), 0, (), Fraction(0))
        local = [tuple(p[c] for c in pivots) for p in pts]

        def lift(a_loc: Sequence[Fraction]) -> Vec:
            a = [Fraction(0)] * n
            for c, v in zip(pivots, a_loc):
                a[c] = v
            return tuple(a)

        facet_list = []
        if r == 1:
            vals = [q[0] for q in local]
            lo, hi = min(vals), max(vals)
            verts = tuple(sorted({pts[vals.index(lo)], pts[vals.index(hi)]}))
            a_hi, a_lo = lift((Fraction(1),)), lift((Fraction(-1),))
            facet_list = [(a_hi, hi, frozenset([pts[vals.index(hi)]])),
                          (a_lo, -lo, frozenset([pts[vals.index(lo)]]))]
            volume = (hi - lo) if n == 1 else Fraction(0)
        else:
            simplices, center = _hull_full(local)
            groups: dict[tuple, set[int]] = {}
            for idx, (a, b) in simplices.items():
                key = normalize_hyperplane(a, b)
                groups.setdefault(key, set()).update(idx)
            # a point is a vertex iff the facet normals through it span R^r
            incident: dict[int, list[Vec]] = {}
            for (a, b), idxs in groups.items():
                for i in idxs:
                    incident.setdefault(i, []).append(a)
            vert_idx = sorted(i for i, normals in incident.items() if rank(normals) == r)
            vset = set(vert_idx)
            verts = tuple(sorted(pts[i] for i in vert_idx))
            for (a, b), idxs in sorted(groups.items()):
                facet_list.append((lift(a), b, frozenset(pts[i] for i in idxs if i in vset)))
            if r == n:
                total = Fraction(0)
                for idx in simplices:
                    total += abs(det([sub(local[j], center) for j in idx]))
                volume = total / factorial(n)
            else:
                volume = Fraction(0)
        for a, b, _ in facet_list:
            halfspaces.append(normalize_hyperplane(a, b))
        facets = tuple((normalize_hyperplane(a, b), vs) for a, b, vs in facet_list)
        return cls(n, verts, tuple(sorted(set(halfspaces))), r, facets, volume)

    @classmethod
    def empty(cls, dim: int) -> "Polytope":
        return cls(dim, (), (), -1, (), Fraction(0))

    @classmethod
    def from_halfspaces(cls, halfspaces: Iterable[tuple[Sequence, object]], dim: int) -> "Polytope":
        hs = [(vec(a), to_fraction(b)) for a, b in halfspaces]
        if any(len(a) != dim for a, _ in hs):
            raise InvalidInput("halfspace normal dimension mismatch")
        for i in range(dim):
            for s in (1, -1):
                c = [Fraction(0)] * dim
                c[i] = Fraction(s)
                status, _, _ = linprog(c, [a for a, _ in hs], [b for _, b in hs])
                if status == "infeasible":
                    return cls.empty(dim)
                if status == "unbounded":
                    raise InvalidInput("halfspaces describe an unbounded set")
        if dim == 0:
            return cls.empty(0)
        points = set()
        normals = [a for a, _ in hs]
        for combo in combinations(range(len(hs)), dim):
            rows = [list(normals[i]) + [hs[i][1]] for i in combo]
            red, piv = rref(rows)
            if piv != list(range(dim)):
                continue
            x = tuple(red[i][dim] for i in range(dim))
            if all(dot(a, x) <= b for a, b in hs):
                points.add(x)
        return cls.from_points(points, dim)

    # queries -----------------------------------------------------------------

    @property
    def is_empty(self) -> bool:
        return not self.vertices

    def volume(self) -> Fraction:
        """Lebesgue volume in the ambient space (zero if not full-dimensional)."""
        return self._volume

    def contains(self, x: Sequence) -> bool:
        if self.is_empty:
            return False
        xv = vec(x)
        return all(dot(a, xv) <= b for a, b in self.halfspaces)

    def interior_contains(self, x: Sequence) -> bool:
        if self.affine_dim != self.dim:
            return False
        xv = vec(x)
        return all(dot(a, xv) < b for a, b in self.halfspaces)

    def facets(self) -> tuple:
        """Relative facets as ((normal, offset), vertex set)."""
        return self._facets

    def translate(self, t: Sequence) -> "Polytope":
        tv = vec(t)
        return Polytope.from_points([tuple(x + y for x, y in zip(v, tv)) for v in self.vertices],
                                    self.dim)

    def centroid_of_vertices(self) -> Vec:
        k = len(self.vertices)
        return tuple(sum(v[d] for v in self.vertices) / k for d in range(self.dim))

    def minkowski_sum(self, other: "Polytope") -> "Polytope":
        return Polytope.from_points([tuple(x + y for x, y in zip(u, v))
                                     for u in self.vertices for v in other.vertices], self.dim)

    def faces(self) -> list[frozenset]:
        """All nonempty faces as vertex sets (the polytope itself included)."""
        if self.is_empty:
            return []
        whole = frozenset(self.vertices)
        found = {whole}
        frontier = [whole]
        facet_sets = [vs for _, vs in self._facets]
        while frontier:
            nxt = []
            for f in frontier:
                for fs in facet_sets:
                    g = f & fs
                    if g and g != f and g not in found:
                        found.add(g)
                        nxt.append(g)
            frontier = nxt
        return sorted(found, key=lambda s: (len(s), sorted(s)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polytope):
            return NotImplemented
        return self.dim == other.dim and set(self.vertices) == set(other.vertices)

    def __hash__(self) -> int:
        return hash((self.dim, frozenset(self.vertices)))

    def to_float_halfspaces(self):
        import numpy as np
        a = np.array([[float(x) for x in h[0]] for h in self.halfspaces], dtype=float)
        b = np.array([float(h[1]) for h in self.halfspaces], dtype=float)
        return a.reshape(len(self.halfspaces), self.dim), b


def box(lo: Sequence, hi: Sequence) -> Polytope:
    """Axis-aligned box with the given corners."""
    lo_v, hi_v = vec(lo), vec(hi)
    n = len(lo_v)
    pts = []
    for mask in range(1 << n):
        pts.append(tuple(hi_v[i] if mask >> i & 1 else lo_v[i] for i in range(n)))
    return Polytope.from_points(pts, n)
