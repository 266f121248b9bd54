"""Convex piecewise-affine functions stored as a max of affine pieces.

All predicates are exact over ``Fraction``. The induced decomposition is found
by walking the vertex graph: from a vertex, every facet of its dual cell gives
an edge direction, and the next vertex is where a new piece catches up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import linprog as float_lp

from ._exact import (InvalidInput, Vec, add, dot, linprog, matvec, nullspace, rank, rref,
                     scale, sub, to_fraction, transpose, vec)
from .polytope import Polytope

Piece = tuple[Vec, Fraction]


@dataclass(frozen=True)
class MaxAffine:
    """f(u) = max_i <slope_i, u> + offset_i with rational data."""

    dim: int
    pieces: tuple[Piece, ...]

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInput("dimension must be positive")
        if not self.pieces:
            raise InvalidInput("a MaxAffine needs at least one piece")
        for m, _ in self.pieces:
            if len(m) != self.dim:
                raise InvalidInput("slope dimension mismatch")

    @classmethod
    def of(cls, pieces: Iterable[tuple[Sequence, object]], dim: int | None = None) -> "MaxAffine":
        ps = tuple((vec(m), to_fraction(c)) for m, c in pieces)
        if not ps:
            raise InvalidInput("a MaxAffine needs at least one piece")
        return cls(dim if dim is not None else len(ps[0][0]), ps)

    @property
    def slopes(self) -> list[Vec]:
        return [m for m, _ in self.pieces]

    def __call__(self, u: Sequence) -> Fraction:
        uv = vec(u)
        return max(dot(m, uv) + c for m, c in self.pieces)

    def values(self, u: Sequence) -> list[Fraction]:
        uv = vec(u)
        return [dot(m, uv) + c for m, c in self.pieces]

    def active(self, u: Sequence) -> list[int]:
        vals = self.values(u)
        top = max(vals)
        return [i for i, v in enumerate(vals) if v == top]

    def gradient(self, u: Sequence) -> Vec:
        """Slope of the lexicographically first active piece."""
        return min(self.pieces[i][0] for i in self.active(u))

    def evaluate_float(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        m = np.array([[float(x) for x in s] for s, _ in self.pieces])
        c = np.array([float(o) for _, o in self.pieces])
        return (pts @ m.T + c).max(axis=1)

    def __add__(self, other: "MaxAffine") -> "MaxAffine":
        if other.dim != self.dim:
            raise InvalidInput("dimension mismatch")
        return canonical_form(MaxAffine(self.dim, tuple(
            (add(m1, m2), c1 + c2) for m1, c1 in self.pieces for m2, c2 in other.pieces)))

    def add_affine(self, slope: Sequence, const=0) -> "MaxAffine":
        s, k = vec(slope), to_fraction(const)
        return MaxAffine(self.dim, tuple((add(m, s), c + k) for m, c in self.pieces))

    def scaled(self, s) -> "MaxAffine":
        s = to_fraction(s)
        if s <= 0:
            raise InvalidInput("scale factor must be positive")
        return MaxAffine(self.dim, tuple((scale(s, m), s * c) for m, c in self.pieces))

    def translated(self, t: Sequence) -> "MaxAffine":
        """u -> f(u - t)."""
        tv = vec(t)
        return MaxAffine(self.dim, tuple((m, c - dot(m, tv)) for m, c in self.pieces))

    def shifted(self, const) -> "MaxAffine":
        return self.add_affine((0,) * self.dim, const)


@dataclass(frozen=True)
class AffineMap:
    """E(u) = matrix @ u + translation, from Q^n to Q^n'."""

    matrix: tuple[Vec, ...]
    translation: Vec

    @classmethod
    def of(cls, matrix: Sequence[Sequence], translation: Sequence | None = None) -> "AffineMap":
        mat = tuple(vec(r) for r in matrix)
        if not mat or len({len(r) for r in mat}) != 1:
            raise InvalidInput("matrix must be a nonempty rectangular array")
        t = vec(translation) if translation is not None else (Fraction(0),) * len(mat)
        if len(t) != len(mat):
            raise InvalidInput("translation length must equal the number of rows")
        return cls(mat, t)

    @classmethod
    def identity(cls, n: int) -> "AffineMap":
        return cls.of([[int(i == j) for j in range(n)] for i in range(n)])

    @property
    def source_dim(self) -> int:
        return len(self.matrix[0])

    @property
    def target_dim(self) -> int:
        return len(self.matrix)

    def __call__(self, u: Sequence) -> Vec:
        return add(matvec(self.matrix, vec(u)), self.translation)

    def compose(self, inner: "AffineMap") -> "AffineMap":
        """self after inner."""
        if self.source_dim != inner.target_dim:
            raise InvalidInput("dimension mismatch in composition")
        cols = transpose(inner.matrix)
        mat = tuple(tuple(dot(row, col) for col in cols) for row in self.matrix)
        return AffineMap(mat, add(matvec(self.matrix, inner.translation), self.translation))


# ---------------------------------------------------------------- canonical form

def _upper_envelope_1d(pieces: list[Piece]) -> list[Piece]:
    hull: list[Piece] = []
    for m, c in sorted(pieces):
        while len(hull) >= 2:
            (m1, c1), (m2, c2) = hull[-2], hull[-1]
            # middle line is useless if the outer two cross no later than it rises
            if (c1 - c) * (m2[0] - m1[0]) <= (c1 - c2) * (m[0] - m1[0]):
                hull.pop()
            else:
                break
        hull.append((m, c))
    return hull


def _is_essential(pieces: list[Piece], i: int, n: int) -> bool:
    mi, ci = pieces[i]
    a_ub, b_ub = [], []
    for j, (mj, cj) in enumerate(pieces):
        if j != i:
            a_ub.append(tuple(sub(mj, mi)) + (Fraction(1),))
            b_ub.append(ci - cj)
    a_ub.append((Fraction(0),) * n + (Fraction(1),))
    b_ub.append(Fraction(1))
    status, _, value = linprog((Fraction(0),) * n + (Fraction(1),), a_ub, b_ub)
    return status == "optimal" and value > 0


def _float_witnesses(pieces: list[Piece], n: int) -> list[bool]:
    """Mark pieces shown essential by an exact check at a float-LP witness point.

    Only a positive certificate is taken from floats; every other piece goes
    through the exact LP.
    """
    m = np.array([[float(x) for x in p] for p, _ in pieces])
    c = np.array([float(x) for _, x in pieces])
    out = []
    for i, (mi, ci) in enumerate(pieces):
        a = np.c_[m - m[i], np.ones(len(pieces))]
        a = np.delete(a, i, axis=0)
        b = np.delete(c[i] - c, i)
        obj = np.r_[np.zeros(n), -1.0]
        res = float_lp(obj, A_ub=a, b_ub=b, bounds=[(None, None)] * n + [(None, 1.0)],
                       method="highs")
        ok = False
        if res.status == 0 and res.x[n] > 0:
            for u in (tuple(Fraction(x).limit_denominator(10**6) for x in res.x[:n]),
                      tuple(Fraction(float(x)) for x in res.x[:n])):
                top = dot(mi, u) + ci
                if all(dot(mj, u) + cj < top for j, (mj, cj) in enumerate(pieces) if j != i):
                    ok = True
                    break
        out.append(ok)
    return out


def canonical_form(f: MaxAffine) -> MaxAffine:
    """Same function, no redundant pieces, pieces sorted by (slope, offset)."""
    best: dict[Vec, Fraction] = {}
    for m, c in f.pieces:
        if m not in best or c > best[m]:
            best[m] = c
    pieces = sorted(best.items())
    if len(pieces) == 1:
        return MaxAffine(f.dim, tuple(pieces))
    if f.dim == 1:
        return MaxAffine(1, tuple(_upper_envelope_1d(pieces)))
    witnessed = _float_witnesses(pieces, f.dim)
    keep = [p for i, p in enumerate(pieces) if witnessed[i] or _is_essential(pieces, i, f.dim)]
    return MaxAffine(f.dim, tuple(keep))


def is_canonical(f: MaxAffine) -> bool:
    return canonical_form(f).pieces == f.pieces


# ------------------------------------------------------------- basic polytopes

def stability_set(f: MaxAffine) -> Polytope:
    return Polytope.from_points(f.slopes, f.dim)


def support_function(body: Polytope) -> MaxAffine:
    if body.is_empty:
        raise InvalidInput("support function of an empty polytope")
    return MaxAffine(body.dim, tuple((v, Fraction(0)) for v in body.vertices))


def subdifferential(f: MaxAffine, u: Sequence) -> Polytope:
    return Polytope.from_points([f.pieces[i][0] for i in f.active(u)], f.dim)


# ---------------------------------------------------------------- vertex walk

class RegionExceeded(Exception):
    """A walk step left the region where the supplied pieces are valid."""


def _descend(pieces: Sequence[Piece], n: int, u: Vec,
             in_region: Callable[[Vec], bool] | None = None,
             screen: "_FloatScreen | None" = None) -> Vec | None:
    """Move from u to a vertex, or return None if the slopes have lineality."""
    fast = screen or _FloatScreen(pieces)
    while True:
        act, top, vals = fast.active(u)
        m0 = pieces[act[0]][0]
        diffs = [sub(pieces[i][0], m0) for i in act[1:]]
        r = rank(diffs) if diffs else 0
        if r == n:
            return u
        moved = False
        for d in nullspace(diffs, n) if diffs else nullspace([], n):
            for sgn in (1, -1):
                dd = scale(sgn, d)
                best = fast.first_hit(u, dd, dot(m0, dd), top, vals)
                if best is not None:
                    u = add(u, scale(best, dd))
                    if in_region is not None and not in_region(u):
                        raise RegionExceeded
                    moved = True
                    break
            if moved:
                break
        if not moved:
            return None


@dataclass
class WalkResult:
    vertices: list[Vec]
    active: dict[Vec, list[int]]
    dual_cells: dict[Vec, Polytope]
    edges: list[tuple[Vec, Vec]]
    rays: list[tuple[Vec, Vec, list[int]]]


def walk_vertices(pieces: Sequence[Piece], n: int, start: Vec,
                  reduce: Callable[[Vec], Vec] | None = None,
                  in_region: Callable[[Vec], bool] | None = None,
                  screen: "_FloatScreen | None" = None) -> WalkResult:
    """Enumerate vertices reachable from the vertex ``start``.

    ``reduce`` maps a vertex to its class representative (used for periodic
    functions); ``in_region`` guards the validity region of ``pieces``.
    """
    red = reduce or (lambda x: x)
    fast = screen or _FloatScreen(pieces)
    first = red(start)
    queue = [first]
    seen = {first}
    res = WalkResult([], {}, {}, [], [])
    while queue:
        w = queue.pop()
        act, top, vals = fast.active(w)
        cell = Polytope.from_points([pieces[i][0] for i in act], n)
        res.vertices.append(w)
        res.active[w] = act
        res.dual_cells[w] = cell
        for (a, b), face_pts in cell.facets():
            on_face = [i for i in act if dot(pieces[i][0], a) == b]
            best = fast.first_hit(w, a, b, top, vals)
            if best is None:
                res.rays.append((w, a, on_face))
                continue
            w2 = add(w, scale(best, a))
            if in_region is not None and not in_region(w2):
                raise RegionExceeded
            res.edges.append((w, w2))
            k = red(w2)
            if k not in seen:
                seen.add(k)
                queue.append(k)
    res.vertices.sort()
    return res


class _FloatScreen:
    """Float pre-selection of candidate pieces; every decision is made exactly.

    Candidates are kept within a relative margin of 1e-9, far above double
    rounding, so the exact optimum is always among them.
    """

    def __init__(self, pieces: Sequence[Piece]):
        self.pieces = pieces
        self.m = np.array([[float(x) for x in p] for p, _ in pieces])
        self.c = np.array([float(x) for _, x in pieces])
        self.mag = np.abs(self.m).sum(axis=1)
        self.den = math.lcm(*(x.denominator for p, _ in pieces for x in p))
        self.mi = np.array([[int(x * self.den) for x in p] for p, _ in pieces], dtype=object)

    def _tol(self, wf: np.ndarray) -> np.ndarray:
        return 1e-9 * (1.0 + self.mag * np.abs(wf).max() + np.abs(self.c))

    def active(self, w: Vec) -> tuple[list[int], Fraction, dict[int, Fraction]]:
        wf = np.array([float(x) for x in w])
        vf = self.m @ wf + self.c
        tol = self._tol(wf)
        cand = np.flatnonzero(vf >= vf.max() - 2 * tol.max())
        vals = {int(i): dot(self.pieces[i][0], w) + self.pieces[i][1] for i in cand}
        top = max(vals.values())
        return sorted(i for i, v in vals.items() if v == top), top, vals

    def first_hit(self, w: Vec, a: Vec, b: Fraction, top: Fraction,
                  vals: dict[int, Fraction]) -> Fraction | None:
        """Smallest t > 0 where some piece catches up along w + t a, or None."""
        b = Fraction(b)
        wf = np.array([float(x) for x in w])
        af = np.array([float(x) for x in a])
        ratef = self.m @ af - float(b)
        vf = self.m @ wf + self.c
        rtol = 1e-9 * (1.0 + self.mag * np.abs(af).max() + abs(float(b)))
        flat = np.flatnonzero(np.abs(ratef) <= rtol)
        cand = set()
        if len(flat):
            # exact sign of the rate for near-parallel pieces, in integers
            ad = math.lcm(*(x.denominator for x in a), b.denominator)
            ai = np.array([int(x * ad) for x in a], dtype=object)
            rate_i = self.mi[flat] @ ai - int(b * ad) * self.den
            cand.update(flat[np.asarray(rate_i > 0, dtype=bool)].tolist())
        pos = np.flatnonzero(ratef > rtol)
        if len(pos):
            tf = (float(top) - vf[pos]) / ratef[pos]
            tmin = tf.min()
            cand.update(pos[tf <= tmin + 1e-6 * (1.0 + abs(tmin))].tolist())
        best = None
        for j in cand:
            mj, cj = self.pieces[j]
            rate = dot(mj, a) - b
            if rate > 0:
                vj = vals.get(j)
                if vj is None:
                    vj = dot(mj, w) + cj
                t = (top - vj) / rate
                if best is None or t < best:
                    best = t
        return best


# ------------------------------------------------------- induced decomposition

@dataclass(frozen=True)
class Cell:
    """Closure of the region where one piece attains the max."""

    piece: int
    slope: Vec
    offset: Fraction
    vertices: tuple[Vec, ...]
    rays: tuple[Vec, ...]
    lineality: tuple[Vec, ...]

    def contains(self, f: MaxAffine, u: Sequence) -> bool:
        return self.piece in f.active(u)


@dataclass(frozen=True)
class Decomposition:
    f: MaxAffine
    vertices: tuple[Vec, ...]
    cells: tuple[Cell, ...]
    dual_cells: dict
    representatives: tuple[Vec, ...]
    lineality: tuple[Vec, ...]


def _pivot_restriction(f: MaxAffine):
    """Pivot columns and lineality basis of the slope-difference matrix."""
    m0 = f.pieces[0][0]
    diffs = [sub(m, m0) for m, _ in f.pieces[1:]]
    if not diffs:
        return [], nullspace([], f.dim)
    _, piv = rref(diffs)
    return piv, nullspace(diffs, f.dim)


def induced_decomposition(f: MaxAffine) -> Decomposition:
    """Vertices and cells of the maximal domains of linearity of f.

    When the slopes do not span M (lineality), there are no vertices; the
    representatives are then vertices of the restriction to pivot coordinates,
    one per minimal face.
    """
    f = canonical_form(f)
    n = f.dim
    piv, lin = _pivot_restriction(f)
    if len(f.pieces) == 1:
        cell = Cell(0, f.pieces[0][0], f.pieces[0][1], (), (), tuple(lin))
        return Decomposition(f, (), (cell,), {}, ((Fraction(0),) * n,), tuple(lin))
    if len(piv) == n:
        start = _descend(f.pieces, n, (Fraction(0),) * n)
        walk = walk_vertices(f.pieces, n, start)
        cells = []
        for i, (m, c) in enumerate(f.pieces):
            verts = tuple(w for w in walk.vertices if i in walk.active[w])
            rays = sorted({ray for _, ray, on in walk.rays if i in on})
            cells.append(Cell(i, m, c, verts, tuple(rays), ()))
        return Decomposition(f, tuple(walk.vertices), tuple(cells), walk.dual_cells,
                             tuple(walk.vertices), ())
    sub_dec = induced_decomposition(
        MaxAffine(len(piv), tuple((tuple(m[k] for k in piv), c) for m, c in f.pieces)))

    def lift(y: Vec) -> Vec:
        x = [Fraction(0)] * n
        for k, v in zip(piv, y):
            x[k] = v
        return tuple(x)

    reps = tuple(lift(y) for y in sub_dec.representatives)
    cells = tuple(Cell(i, m, c, (), (), tuple(lin)) for i, (m, c) in enumerate(f.pieces))
    return Decomposition(f, (), cells, {}, reps, tuple(lin))


# ---------------------------------------------------------------- Legendre dual

@dataclass(frozen=True)
class ConjugatePL:
    """Convex PL function on a polytope: x -> max_k <p_k, x> + c_k on domain."""

    domain: Polytope
    g: MaxAffine

    def __call__(self, x: Sequence) -> Fraction | float:
        if not self.domain.contains(x):
            return float("inf")
        return self.g(x)


def legendre_transform(f: MaxAffine) -> tuple[Polytope, ConjugatePL]:
    f = canonical_form(f)
    dec = induced_decomposition(f)
    domain = stability_set(f)
    g = canonical_form(MaxAffine(f.dim, tuple((p, -f(p)) for p in dec.representatives)))
    return domain, ConjugatePL(domain, g)


def legendre_of_conjugate(h: ConjugatePL) -> MaxAffine:
    """u -> sup_{x in domain} <x, u> - g(x), computed from the cells of g on domain."""
    n = h.domain.dim
    pts = set()
    for k, (pk, ck) in enumerate(h.g.pieces):
        hs = list(h.domain.halfspaces)
        for j, (pj, cj) in enumerate(h.g.pieces):
            if j != k:
                hs.append((sub(pj, pk), ck - cj))
        cell = Polytope.from_halfspaces(hs, n)
        pts.update(cell.vertices)
    return canonical_form(MaxAffine(n, tuple((x, -h.g(x)) for x in sorted(pts))))


def double_transform(f: MaxAffine) -> MaxAffine:
    return legendre_of_conjugate(legendre_transform(f)[1])


# --------------------------------------------------------- rational approximation

def _rationalize(x, max_den: int) -> Fraction:
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return Fraction(float(x)).limit_denominator(max_den)


def _fd_gradient(g: Callable, p: Sequence, h: float = 1e-6) -> list[float]:
    p = [float(x) for x in p]
    out = []
    for i in range(len(p)):
        up, dn = list(p), list(p)
        up[i] += h
        dn[i] -= h
        out.append((float(g(up)) - float(g(dn))) / (2 * h))
    return out


def _round_down(t: Fraction, eps: Fraction) -> Fraction:
    """A rational in [t - 2eps/3, t - eps/3] with a small denominator."""
    if eps == 0:
        return t
    target = t - eps / 2
    den = 1
    while True:
        c = target.limit_denominator(den)
        if abs(c - target) <= eps / 6:
            return c
        den *= 10


def supporting_piece(g: Callable, p: Sequence, eps: Fraction,
                     grad: Callable | None = None, max_den: int = 10**6) -> Piece:
    """Rational affine minorant candidate of g touching it at p within eps."""
    pv = vec(p)
    val = g(pv)
    if isinstance(val, float) and not np.isfinite(val):
        raise InvalidInput("oracle returned a non-finite value")
    raw = grad(pv) if grad is not None else _fd_gradient(g, pv)
    slope = tuple(_rationalize(x, max_den) for x in raw)
    t = to_fraction(val) - dot(slope, pv)
    return slope, _round_down(t, to_fraction(eps))


def rational_pl_approximate(g: Callable, grid: Iterable[Sequence], eps,
                            grad: Callable | None = None, max_den: int = 10**6) -> MaxAffine:
    """Max of rational supporting pieces of the convex oracle g at the grid points.

    With an exact gradient oracle the result satisfies h <= g everywhere and
    g - eps <= h on the grid. ``h.shifted(eps)`` is a one-sided over-approximation
    on the grid.
    """
    eps = to_fraction(eps)
    if eps < 0:
        raise InvalidInput("eps must be nonnegative")
    pts = [vec(p) for p in grid]
    if not pts:
        raise InvalidInput("grid must be nonempty")
    pieces = [supporting_piece(g, p, eps, grad, max_den) for p in pts]
    return canonical_form(MaxAffine(len(pts[0]), tuple(pieces)))
