"""Numerical bookkeeping for Mumford models: component degrees and masses."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import Sequence, Union

from ._exact import InvalidInput, Vec, add, dot, linprog, nullspace, scale, sub, vec
from .abelian import PeriodicPL, periodic_ma_measure
from .convex import MaxAffine
from .monge_ampere import DiscreteMeasure
from .polytope import Polytope


@dataclass(frozen=True)
class MumfordContext:
    g: int
    n: int
    deg_h_b: int
    d: int

    def __post_init__(self):
        if not (self.g >= self.n >= 0):
            raise InvalidInput("need g >= n >= 0")
        if self.deg_h_b < 1 or self.d < 1:
            raise InvalidInput("degrees must be positive")

    @property
    def prefactor(self) -> Fraction:
        """g!/(g-n)! deg_H(B)."""
        return Fraction(factorial(self.g), factorial(self.g - self.n)) * self.deg_h_b

    @property
    def chi(self) -> Fraction:
        return Fraction(self.d * self.deg_h_b, factorial(self.g - self.n))


def _dual_cell(f: MaxAffine | PeriodicPL, w: Vec) -> Polytope:
    if isinstance(f, PeriodicPL):
        pieces = f.pieces_on([w])
    else:
        pieces = list(f.pieces)
    vals = [dot(m, w) + c for m, c in pieces]
    top = max(vals)
    return Polytope.from_points([m for (m, _), v in zip(pieces, vals) if v == top], len(w))


def vertex_degree(ctx: MumfordContext, f: MaxAffine | PeriodicPL, w: Sequence) -> Fraction:
    """Degree of the component Y_w: g!/(g-n)! deg_H(B) vol(dual cell at w)."""
    wv = vec(w)
    if len(wv) != ctx.n:
        raise InvalidInput("vertex dimension must equal the torus rank n")
    cell = _dual_cell(f, wv)
    if cell.affine_dim < ctx.n:
        warnings.warn(f"{tuple(map(str, wv))} is not a vertex; degree 0", stacklevel=2)
        return Fraction(0)
    return ctx.prefactor * cell.volume()


@dataclass(frozen=True)
class DegreeCheck:
    total: Fraction
    expected: Fraction
    equal: bool


def total_degree_check(ctx: MumfordContext, f: PeriodicPL) -> DegreeCheck:
    if f.dim != ctx.n:
        raise InvalidInput("torus rank mismatch")
    if f.cocycle.ptav.d != ctx.d:
        raise InvalidInput("polarization degree does not match the context")
    mu = periodic_ma_measure(f)
    total = sum((vertex_degree(ctx, f, w) for w in mu.points), Fraction(0))
    expected = ctx.prefactor * ctx.d
    return DegreeCheck(total, expected, total == expected)


@dataclass(frozen=True)
class ChiReport:
    chi: Fraction
    deg_l: Fraction
    deg_phi: Fraction
    integral: bool


def chi_consistency(ctx: MumfordContext) -> ChiReport:
    chi = ctx.chi
    integral = chi.denominator == 1
    if not integral:
        warnings.warn("chi is not an integer; inputs do not come from an abelian variety",
                      stacklevel=2)
    return ChiReport(chi, factorial(ctx.g) * chi, chi * chi, integral)


def lift_factor(ctx: MumfordContext) -> int:
    return comb(ctx.g, ctx.g - ctx.n) * ctx.deg_h_b


def skeleton_measure_lift(ctx: MumfordContext, mu: DiscreteMeasure) -> DiscreteMeasure:
    if mu.dim != ctx.n:
        raise InvalidInput("measure dimension must equal the torus rank n")
    return mu.scaled(lift_factor(ctx))


# ------------------------------------------------------------- PL expressions

@dataclass(frozen=True)
class Affine:
    slope: Vec
    offset: Fraction = Fraction(0)

    def __call__(self, u: Vec) -> Fraction:
        return dot(self.slope, u) + self.offset


@dataclass(frozen=True)
class Max:
    args: tuple


@dataclass(frozen=True)
class Min:
    args: tuple


@dataclass(frozen=True)
class Sum:
    args: tuple


@dataclass(frozen=True)
class Neg:
    arg: object


PLExpr = Union[Affine, Max, Min, Sum, Neg]


def evaluate(e: PLExpr, u: Sequence) -> Fraction:
    uv = vec(u)
    if isinstance(e, Affine):
        return e(uv)
    if isinstance(e, Max):
        return max(evaluate(a, uv) for a in e.args)
    if isinstance(e, Min):
        return min(evaluate(a, uv) for a in e.args)
    if isinstance(e, Sum):
        return sum((evaluate(a, uv) for a in e.args), Fraction(0))
    if isinstance(e, Neg):
        return -evaluate(e.arg, uv)
    raise InvalidInput(f"unknown PL node {type(e).__name__}")


def germ(e: PLExpr, u: Vec) -> PLExpr:
    """Homogeneous tree for the directional derivative v -> D e(u; v)."""
    if isinstance(e, Affine):
        return Affine(e.slope)
    if isinstance(e, (Max, Min)):
        vals = [evaluate(a, u) for a in e.args]
        best = max(vals) if isinstance(e, Max) else min(vals)
        kids = tuple(germ(a, u) for a, v in zip(e.args, vals) if v == best)
        return kids[0] if len(kids) == 1 else type(e)(kids)
    if isinstance(e, Sum):
        return Sum(tuple(germ(a, u) for a in e.args))
    if isinstance(e, Neg):
        return Neg(germ(e.arg, u))
    raise InvalidInput(f"unknown PL node {type(e).__name__}")


def _pieces(e: PLExpr) -> set[Vec]:
    """Linear forms that the homogeneous tree can take on some region."""
    if isinstance(e, Affine):
        return {e.slope}
    if isinstance(e, (Max, Min)):
        return set().union(*(_pieces(a) for a in e.args))
    if isinstance(e, Sum):
        acc = {tuple(Fraction(0) for _ in next(iter(_pieces(e.args[0]))))}
        for a in e.args:
            acc = {add(x, y) for x in acc for y in _pieces(a)}
        return acc
    if isinstance(e, Neg):
        return {scale(-1, x) for x in _pieces(e.arg)}
    raise InvalidInput(f"unknown PL node {type(e).__name__}")


def _walls(e: PLExpr) -> set[Vec]:
    """Normals of hyperplanes (through 0) where the homogeneous tree may bend."""
    out: set[Vec] = set()
    if isinstance(e, (Max, Min)):
        forms = [_pieces(a) for a in e.args]
        for i in range(len(forms)):
            for j in range(i + 1, len(forms)):
                for x in forms[i]:
                    for y in forms[j]:
                        diff = sub(x, y)
                        if any(diff):
                            out.add(_normalize(diff))
    for a in getattr(e, "args", ()):
        out |= _walls(a)
    if isinstance(e, Neg):
        out |= _walls(e.arg)
    return out


def _normalize(a: Vec) -> Vec:
    lead = next(x for x in a if x != 0)
    return tuple(x / abs(lead) for x in a) if lead > 0 else tuple(-x / abs(lead) for x in a)


def _cell_points(normals: list[Vec], basis: list[Vec], n: int) -> list[Vec]:
    """One interior point per open cell of a central arrangement inside span(basis)."""
    k = len(basis)
    if k == 0:
        return [(Fraction(0),) * n]
    restricted = []
    for a in normals:
        r = tuple(dot(a, b) for b in basis)
        if any(r):
            restricted.append(r)
    cells: list[list[tuple[Vec, int]]] = [[]]
    for a in restricted:
        new = []
        for cell in cells:
            for sign in (1, -1):
                trial = cell + [(a, sign)]
                if _interior_point(trial, k) is not None:
                    new.append(trial)
        cells = new
    out = []
    for cell in cells:
        y = _interior_point(cell, k)
        out.append(tuple(sum((y[i] * basis[i][j] for i in range(k)), Fraction(0))
                         for j in range(n)))
    return out


def _interior_point(signs: list[tuple[Vec, int]], k: int) -> Vec | None:
    if not signs:
        return (Fraction(1),) + (Fraction(0),) * (k - 1)
    one = Fraction(1)
    a_ub = [tuple(-s * x for x in a) + (one,) for a, s in signs]
    b_ub = [Fraction(0)] * len(signs)
    for i in range(k):  # box keeps the cone slice bounded
        e = [Fraction(0)] * (k + 1)
        e[i] = one
        a_ub.append(tuple(e))
        b_ub.append(one)
        e = [Fraction(0)] * (k + 1)
        e[i] = -one
        a_ub.append(tuple(e))
        b_ub.append(one)
    a_ub.append((Fraction(0),) * k + (one,))
    b_ub.append(one)
    status, x, val = linprog((Fraction(0),) * k + (one,), a_ub, b_ub)
    if status != "optimal" or val <= 0:
        return None
    return tuple(x[:k])


def _is_convex_homogeneous(g: PLExpr, n: int) -> bool:
    """Local convexity across every wall piece of a homogeneous PL function."""
    if n == 1:
        e = ((Fraction(1),))
        return evaluate(g, e) + evaluate(g, scale(-1, e)) >= 0
    walls = sorted(_walls(g))
    for a in walls:
        basis = nullspace([a], n)
        others = [b for b in walls if b != a]
        for x in _cell_points(others, basis, n):
            local = germ(g, x)
            if evaluate(local, a) + evaluate(local, scale(-1, a)) < 0:
                return False
    return True


def as_expr(f: MaxAffine) -> PLExpr:
    return Max(tuple(Affine(m, c) for m, c in f.pieces))


def nef_at_vertex(f: MaxAffine | PeriodicPL | PLExpr, w: Sequence) -> bool:
    """Convexity of the germ of f at w (the recession function on the star fan)."""
    if isinstance(f, PeriodicPL):
        return True  # a sup of affine functions
    if isinstance(f, MaxAffine):
        f = as_expr(f)
    wv = vec(w)
    return _is_convex_homogeneous(germ(f, wv), len(wv))

