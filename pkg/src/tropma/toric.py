"""Rational fans, boundary extension toward toric strata, psh and theta-psh tests."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import gcd
from typing import Iterable, Sequence

from ._exact import InvalidInput, Vec, det, dot, linprog, primitive, rank, rref, solve, vec
from .convex import AffineMap, MaxAffine, canonical_form, induced_decomposition
from .polytope import Polytope

Ray = tuple[int, ...]


def _positive_functional(rays: Sequence[Ray], n: int) -> Vec | None:
    """Some w with <w, r> >= 1 on all rays, or None if the cone has lineality."""
    if not rays:
        return (Fraction(0),) * n
    status, w, _ = linprog((Fraction(0),) * n,
                           [tuple(-Fraction(x) for x in r) for r in rays],
                           [Fraction(-1)] * len(rays))
    return w if status == "optimal" else None


@dataclass(frozen=True)
class Cone:
    """Strictly convex rational cone given by its extreme primitive rays."""

    rays: tuple[Ray, ...]
    n: int
    functional: Vec = field(compare=False, repr=False)
    section: Polytope | None = field(compare=False, repr=False)
    inequalities: tuple[Vec, ...] = field(compare=False, repr=False)

    @classmethod
    def generated_by(cls, gens: Iterable[Sequence], n: int) -> "Cone":
        rays = sorted({primitive(g) for g in gens})
        w = _positive_functional(rays, n)
        if w is None:
            raise InvalidInput(f"cone generated by {rays} is not strictly convex")
        if not rays:
            eye = [tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)]
            ineq = tuple(eye + [tuple(-x for x in e) for e in eye])
            return cls((), n, w, None, ineq)
        pts = [tuple(Fraction(x) / dot(w, r) for x in r) for r in rays]
        section = Polytope.from_points(pts, n)
        extreme = tuple(sorted(primitive(v) for v in section.vertices))
        ineq = [tuple(-x for x in w)]
        for a, b in section.halfspaces:
            row = tuple(ai - b * wi for ai, wi in zip(a, w))
            if any(row):
                ineq.append(row)
        return cls(extreme, n, w, section, tuple(sorted(set(ineq))))

    @property
    def dim(self) -> int:
        return rank([tuple(Fraction(x) for x in r) for r in self.rays]) if self.rays else 0

    def contains(self, x: Sequence) -> bool:
        xv = vec(x)
        return all(dot(a, xv) <= 0 for a in self.inequalities)

    def faces(self) -> list[tuple[Ray, ...]]:
        """Ray sets of all faces, the zero cone and the cone itself included."""
        out = {()}
        if self.section is None:
            return [()]
        if rank([tuple(Fraction(x) for x in r) for r in self.rays]) == len(self.rays):
            for k in range(1, len(self.rays) + 1):
                out.update(combinations(self.rays, k))
        else:
            scale_of = {v: primitive(v) for v in self.section.vertices}
            for face in self.section.faces():
                out.add(tuple(sorted(scale_of[v] for v in face)))
        return sorted(out, key=lambda s: (len(s), s))

    def relint_point(self) -> Vec:
        pt = [Fraction(0)] * self.n
        for r in self.rays:
            for i, x in enumerate(r):
                pt[i] += x
        return tuple(pt)

    def intersect(self, other: "Cone") -> "Cone":
        hs = [(a, Fraction(0)) for a in self.inequalities + other.inequalities]
        w = self.functional if self.rays else other.functional
        if not any(w):
            return Cone.generated_by([], self.n)
        hs.append((w, Fraction(1)))
        hs.append((tuple(-x for x in w), Fraction(-1)))
        sec = Polytope.from_halfspaces(hs, self.n)
        return Cone.generated_by(sec.vertices, self.n)


@dataclass(frozen=True)
class Fan:
    """Finite rational fan; ``cones`` holds every cone including all faces."""

    dim: int
    cones: tuple[Cone, ...]
    declared: tuple[tuple[Ray, ...], ...]

    @classmethod
    def of(cls, dim: int, cones: Iterable[Iterable[Sequence]]) -> "Fan":
        declared = []
        closure: dict[tuple[Ray, ...], Cone] = {}
        for gens in cones:
            gens = list(gens)
            for g in gens:
                if len(g) != dim:
                    raise InvalidInput("ray dimension mismatch")
                if any(Fraction(x).denominator != 1 for x in g):
                    raise InvalidInput("rays must be integer vectors")
            c = Cone.generated_by(gens, dim)
            declared.append(c.rays)
            for face in c.faces():
                if face not in closure:
                    closure[face] = Cone.generated_by(face, dim) if face != c.rays else c
        ordered = tuple(closure[k] for k in sorted(closure, key=lambda s: (len(s), s)))
        return cls(dim, ordered, tuple(declared))

    def index(self, rays: Iterable[Sequence]) -> int:
        key = tuple(sorted(primitive(r) for r in rays))
        for i, c in enumerate(self.cones):
            if c.rays == key:
                return i
        raise InvalidInput(f"cone {key} is not in the fan")

    @property
    def maximal(self) -> list[Cone]:
        out = []
        for c in self.cones:
            if not any(c is not d and set(c.rays) < set(d.rays) for d in self.cones):
                out.append(c)
        return out

    def cone_containing(self, x: Sequence) -> Cone | None:
        for c in sorted(self.cones, key=lambda c: -len(c.rays)):
            if c.contains(x):
                return c
        return None


@dataclass(frozen=True)
class FanReport:
    valid: bool
    complete: bool
    smooth: bool
    witness: Vec | None = None
    reason: str = ""


def _gcd_of_maximal_minors(rays: Sequence[Ray]) -> int:
    k = len(rays)
    n = len(rays[0])
    g = 0
    for cols in combinations(range(n), k):
        m = det([[r[c] for c in cols] for r in rays])
        g = gcd(g, abs(int(m)))
    return g


def validate_fan(fan: Fan, samples: int = 64, seed: int = 0) -> FanReport:
    """Check fan axioms, completeness and smoothness."""
    n = fan.dim
    faces_of = {c.rays: set(c.faces()) for c in fan.cones}
    for c1, c2 in combinations(fan.cones, 2):
        inter = c1.intersect(c2)
        if inter.rays not in faces_of[c1.rays] or inter.rays not in faces_of[c2.rays]:
            return FanReport(False, False, False, inter.relint_point(),
                             f"cones {c1.rays} and {c2.rays} meet outside a common face")
    smooth = True
    for c in fan.maximal:
        if not c.rays:
            continue
        if rank([tuple(Fraction(x) for x in r) for r in c.rays]) != len(c.rays) \
                or _gcd_of_maximal_minors(c.rays) != 1:
            smooth = False
    full = [c for c in fan.cones if c.dim == n]
    complete = bool(full)
    if complete:
        for c in full:
            for face in faces_of[c.rays]:
                fdim = Cone.generated_by(face, n).dim if face else 0
                if fdim == n - 1:
                    owners = sum(1 for d in full if face in faces_of[d.rays])
                    if owners != 2:
                        complete = False
                        break
            if not complete:
                break
    if complete:
        rng = random.Random(seed)
        for _ in range(samples):
            d = tuple(rng.randint(-1000, 1000) for _ in range(n))
            if any(d) and fan.cone_containing(d) is None:
                complete = False
                break
    return FanReport(True, complete, smooth)


# ------------------------------------------------------------------ star fans

def fan_of_dual_cell(cell: Polytope) -> Fan:
    """Normal fan of a full-dimensional dual cell: one cone per vertex slope."""
    if cell.affine_dim != cell.dim:
        raise InvalidInput("point is not a vertex: dual cell is not full-dimensional")
    cones = []
    for v in cell.vertices:
        normals = [a for (a, b), vs in cell.facets() if v in vs]
        cones.append(normals)
    return Fan.of(cell.dim, cones)


def _dual_cell_at(f: MaxAffine, w: Sequence) -> Polytope:
    return Polytope.from_points([f.pieces[i][0] for i in f.active(w)], f.dim)


def star_fan(f: MaxAffine, w: Sequence) -> Fan:
    return fan_of_dual_cell(_dual_cell_at(canonical_form(f), w))


@dataclass(frozen=True)
class RecessionFunction:
    """Linear slope per maximal cone of a star fan."""

    fan: Fan
    slopes: tuple[tuple[tuple[Ray, ...], Vec], ...]

    def slope_on(self, cone_rays: tuple[Ray, ...]) -> Vec:
        return dict(self.slopes)[cone_rays]

    def __call__(self, d: Sequence) -> Fraction:
        dv = vec(d)
        for rays, m in self.slopes:
            if Cone.generated_by(rays, self.fan.dim).contains(dv):
                return dot(m, dv)
        raise InvalidInput("direction outside the fan support")

    def is_convex(self) -> bool:
        ms = [m for _, m in self.slopes]
        for rays, m in self.slopes:
            d = Cone.generated_by(rays, self.fan.dim).relint_point()
            if dot(m, d) != max(dot(x, d) for x in ms):
                return False
        return True


def recession_function(f: MaxAffine, w: Sequence) -> RecessionFunction:
    f = canonical_form(f)
    cell = _dual_cell_at(f, w)
    fan = fan_of_dual_cell(cell)
    slopes = []
    for v in cell.vertices:
        normals = [a for (a, b), vs in cell.facets() if v in vs]
        slopes.append((Cone.generated_by(normals, f.dim).rays, v))
    return RecessionFunction(fan, tuple(slopes))


# ------------------------------------------------------------ boundary extension

def quotient_basis(cone: Cone) -> list[int]:
    """Coordinates kept on N(sigma): standard vectors outside the pivot columns."""
    if not cone.rays:
        return list(range(cone.n))
    _, piv = rref([tuple(Fraction(x) for x in r) for r in cone.rays])
    return [j for j in range(cone.n) if j not in piv]


def quotient_coords(cone: Cone, x: Sequence) -> Vec:
    """Coordinates of the class of x in N / span(sigma)."""
    xv = vec(x)
    keep = quotient_basis(cone)
    indep: list[Vec] = []
    for r in cone.rays:
        rv = tuple(Fraction(v) for v in r)
        if rank(indep + [rv]) > len(indep):
            indep.append(rv)
    # x = sum a_r r + sum_{j in keep} y_j e_j
    cols = indep + [tuple(Fraction(int(i == j)) for i in range(cone.n)) for j in keep]
    sol = solve([list(row) for row in zip(*cols)], xv)
    return tuple(sol[len(indep):])


@dataclass(frozen=True)
class ExtendedPoint:
    """Point of the partial compactification: a cone of the fan plus N(sigma) coordinates."""

    cone: int
    coords: Vec


@dataclass(frozen=True)
class Extension:
    status: str  # "finite", "minus_infinity" or "fails"
    value: MaxAffine | Fraction | None
    quotient_basis: tuple[int, ...]

    def evaluate(self, coords: Sequence) -> Fraction | float:
        if self.status == "fails":
            return float("inf")
        if self.status == "minus_infinity":
            return float("-inf")
        if isinstance(self.value, Fraction):
            return self.value
        return self.value(coords)


def extension_on_cone(f: MaxAffine, cone: Cone) -> Extension:
    keep = tuple(quotient_basis(cone))
    vanishing = []
    for m, c in f.pieces:
        vals = [dot(m, r) for r in cone.rays]
        if any(v > 0 for v in vals):
            return Extension("fails", None, keep)
        if all(v == 0 for v in vals):
            vanishing.append((m, c))
    if not vanishing:
        return Extension("minus_infinity", None, keep)
    if not keep:
        return Extension("finite", max(c for _, c in vanishing), keep)
    value = canonical_form(MaxAffine(len(keep), tuple(
        (tuple(m[j] for j in keep), c) for m, c in vanishing)))
    return Extension("finite", value, keep)


def boundary_extension(f: MaxAffine, fan: Fan) -> dict[tuple[Ray, ...], Extension]:
    return {c.rays: extension_on_cone(f, c) for c in fan.cones}


def evaluate_extended(f: MaxAffine, fan: Fan, point: ExtendedPoint) -> Fraction | float:
    cone = fan.cones[point.cone]
    ext = extension_on_cone(f, cone)
    if len(point.coords) != len(ext.quotient_basis):
        raise InvalidInput("coordinate count must equal n - dim(sigma)")
    return ext.evaluate(point.coords)


def is_psh(f: MaxAffine, fan: Fan) -> bool:
    return all(e.status != "fails" for e in boundary_extension(f, fan).values())


# ----------------------------------------------------------------- Green data

@dataclass(frozen=True)
class GreenData:
    """Integral slope of Psi on each maximal cone and a convex Green function."""

    fan: Fan
    psi: tuple[tuple[tuple[Ray, ...], Vec], ...]
    green: MaxAffine

    def slope_for(self, cone: Cone) -> Vec:
        for rays, m in self.psi:
            if set(cone.rays) <= set(rays):
                return m
        raise InvalidInput(f"no slope of Psi covers cone {cone.rays}")

    def check(self) -> tuple[bool, str]:
        for (r1, m1), (r2, m2) in combinations(self.psi, 2):
            for r in set(r1) & set(r2):
                if dot(m1, r) != dot(m2, r):
                    return False, f"Psi slopes disagree on ray {r}"
        for c in self.fan.cones:
            ext = extension_on_cone(self.green.add_affine(self.slope_for(c)), c)
            if ext.status != "finite":
                return False, f"green + m_sigma is not finite toward cone {c.rays}"
        return True, ""


def canonical_green(fan: Fan, slopes: dict) -> GreenData:
    """GreenData with g0 = -Psi for a concave Psi given by slopes on maximal cones."""
    psi = []
    for rays, m in slopes.items():
        key = tuple(sorted(primitive(r) for r in rays))
        psi.append((key, vec(m)))
    green = canonical_form(MaxAffine(fan.dim, tuple(
        (tuple(-x for x in m), Fraction(0)) for _, m in psi)))
    return GreenData(fan, tuple(sorted(psi)), green)


def is_theta_psh(h: MaxAffine, green: GreenData, fan: Fan) -> bool:
    """phi = h - g0 is theta-psh iff h + m_sigma extends on every cone."""
    for c in fan.cones:
        if extension_on_cone(h.add_affine(green.slope_for(c)), c).status == "fails":
            return False
    return True


# ------------------------------------------------------------------ functoriality

def pullback(f: MaxAffine, e: AffineMap) -> MaxAffine:
    if e.target_dim != f.dim:
        raise InvalidInput("affine map target must match the function's dimension")
    cols = list(zip(*e.matrix))
    pieces = tuple((tuple(dot(col, m) for col in cols), dot(m, e.translation) + c)
                   for m, c in f.pieces)
    return canonical_form(MaxAffine(e.source_dim, pieces))


def normal_fan(body: Polytope) -> Fan:
    return fan_of_dual_cell(body)


def vertices_of(f: MaxAffine) -> tuple[Vec, ...]:
    return induced_decomposition(f).vertices
