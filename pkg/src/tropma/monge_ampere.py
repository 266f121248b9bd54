"""Discrete real Monge-Ampere measures of convex PL functions."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import factorial
from typing import Iterable, Sequence

import numpy as np

from ._exact import InvalidInput, Vec, add, dot, linprog, to_fraction, vec
from .convex import (MaxAffine, _FloatScreen, canonical_form, induced_decomposition,
                     stability_set)
from .polytope import Polytope


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite atomic measure; atoms sorted by point, duplicates merged."""

    dim: int
    atoms: tuple[tuple[Vec, Fraction], ...]

    @classmethod
    def of(cls, dim: int, atoms: Iterable[tuple[Sequence, object]], keep_zero: bool = False
           ) -> "DiscreteMeasure":
        merged: dict[Vec, Fraction] = {}
        for p, m in atoms:
            pv, mv = vec(p), to_fraction(m)
            if len(pv) != dim:
                raise InvalidInput("atom dimension mismatch")
            merged[pv] = merged.get(pv, Fraction(0)) + mv
        if any(m < 0 for m in merged.values()):
            raise InvalidInput("masses must be nonnegative")
        items = tuple(sorted((p, m) for p, m in merged.items() if keep_zero or m != 0))
        return cls(dim, items)

    @property
    def total(self) -> Fraction:
        return sum((m for _, m in self.atoms), Fraction(0))

    @property
    def points(self) -> list[Vec]:
        return [p for p, _ in self.atoms]

    @property
    def masses(self) -> list[Fraction]:
        return [m for _, m in self.atoms]

    def translated(self, t: Sequence) -> "DiscreteMeasure":
        tv = vec(t)
        return DiscreteMeasure.of(self.dim, [(add(p, tv), m) for p, m in self.atoms])

    def scaled(self, s) -> "DiscreteMeasure":
        s = to_fraction(s)
        return DiscreteMeasure.of(self.dim, [(p, s * m) for p, m in self.atoms])

    def mass_in_box(self, lo: Sequence, hi: Sequence) -> Fraction:
        lo_v, hi_v = vec(lo), vec(hi)
        return sum((m for p, m in self.atoms
                    if all(a <= x <= b for a, x, b in zip(lo_v, p, hi_v))), Fraction(0))


def _sum_signed(dim: int, parts: Iterable[tuple[Sequence, Fraction]]) -> DiscreteMeasure:
    merged: dict[Vec, Fraction] = {}
    for p, m in parts:
        merged[p] = merged.get(p, Fraction(0)) + m
    return DiscreteMeasure.of(dim, [(p, m) for p, m in merged.items() if m != 0])


def dual_cell(f: MaxAffine, w: Sequence) -> Polytope:
    """Subdifferential at a vertex; rejects points that are not vertices."""
    wv = vec(w)
    cell = Polytope.from_points([f.pieces[i][0] for i in f.active(wv)], f.dim)
    if cell.affine_dim != f.dim:
        raise InvalidInput(f"{tuple(map(str, wv))} is not a vertex of the decomposition")
    return cell


def ma_measure(f: MaxAffine) -> DiscreteMeasure:
    dec = induced_decomposition(f)
    nf = factorial(f.dim)
    return DiscreteMeasure.of(f.dim, [(w, nf * dec.dual_cells[w].volume()) for w in dec.vertices])


def mixed_ma(*fs: MaxAffine) -> DiscreteMeasure:
    """Mixed measure by inclusion-exclusion over sums of the arguments."""
    if not fs:
        raise InvalidInput("need at least one function")
    n = fs[0].dim
    if any(f.dim != n for f in fs) or len(fs) != n:
        raise InvalidInput("mixed_ma needs exactly n functions of dimension n")
    parts: list[tuple[Vec, Fraction]] = []
    for k in range(1, n + 1):
        sign = (-1) ** (n - k)
        for subset in combinations(range(n), k):
            total = fs[subset[0]]
            for j in subset[1:]:
                total = total + fs[j]
            for p, m in ma_measure(total).atoms:
                parts.append((p, Fraction(sign) * m / factorial(n)))
    return _sum_signed(n, parts)


@dataclass(frozen=True)
class MassIdentity:
    total: Fraction
    expected: Fraction
    equal: bool


def mass_identity_check(f: MaxAffine) -> MassIdentity:
    total = ma_measure(f).total
    expected = factorial(f.dim) * stability_set(canonical_form(f)).volume()
    return MassIdentity(total, expected, total == expected)


# -------------------------------------------------------------- comparison check

@dataclass
class ComparisonReport:
    status: str  # "pass", "vacuous-pass" or "fail"
    samples_in_omega: int
    slopes_checked: int
    counterexamples: list = field(default_factory=list)


def _bounding_box(fs: Sequence[MaxAffine]) -> tuple[list[Fraction], list[Fraction]]:
    n = fs[0].dim
    pts: list[Vec] = []
    for f in fs:
        pts.extend(induced_decomposition(f).representatives)
    lo = [min(p[i] for p in pts) - 1 for i in range(n)]
    hi = [max(p[i] for p in pts) + 1 for i in range(n)]
    return lo, hi


def _argmin_face(f: MaxAffine, h: Vec) -> Polytope:
    """{x : h in subdifferential of f at x}, a bounded face when h is interior."""
    n = f.dim
    a_ub = [tuple(m) + (Fraction(-1),) for m, _ in f.pieces]
    b_ub = [-c for _, c in f.pieces]
    obj = tuple(h) + (Fraction(-1),)  # maximize <h,x> - t
    status, sol, val = linprog(obj, a_ub, b_ub)
    if status != "optimal":
        return Polytope.empty(n)
    v_star = -val  # min of f - <h, .>
    hs = [(tuple(mi - hi for mi, hi in zip(m, h)), v_star - c) for m, c in f.pieces]
    return Polytope.from_halfspaces(hs, n)


def _float_values(f: MaxAffine, yf: np.ndarray) -> np.ndarray:
    m = np.array([[float(x) for x in p] for p, _ in f.pieces]).reshape(len(f.pieces), f.dim)
    return yf @ m.T + np.array([float(c) for _, c in f.pieces])


def _slope_size(fs: Sequence[MaxAffine]) -> float:
    return max(float(abs(x)) for f in fs for p, _ in f.pieces for x in p) if fs else 0.0


def _exact_sample(lo: Sequence[Fraction], hi: Sequence[Fraction], ticks: np.ndarray,
                  res: int) -> Vec:
    return tuple(a + (b - a) * Fraction(int(t), res) for a, b, t in zip(lo, hi, ticks))


def _slope_verdicts(f: MaxAffine, g: MaxAffine, body: Polytope, slopes: list[Vec]
                    ) -> list[tuple[Vec, bool]]:
    """For the active slopes of g and their barycenter: those interior to body,
    each with whether f attains it somewhere on {f < g}."""
    k = len(slopes)
    cands = set(slopes)
    cands.add(tuple(sum(s[d] for s in slopes) / k for d in range(f.dim)))
    out = []
    for h in sorted(cands):
        if body.interior_contains(h):
            face = _argmin_face(f, h)
            out.append((h, (not face.is_empty) and max(g(x) - f(x) for x in face.vertices) > 0))
    return out


def comparison_check(f: MaxAffine, g: MaxAffine, body: Polytope, samples: int = 1000,
                     seed: int = 0) -> ComparisonReport:
    """Sample Omega = {f < g} and check that slopes of g there lying in the
    interior of ``body`` are slopes of f somewhere in Omega."""
    if f.dim != g.dim or body.dim != f.dim:
        raise InvalidInput("dimension mismatch")
    f = canonical_form(f)
    g = canonical_form(g)
    rng = random.Random(seed)
    lo, hi = _bounding_box([f, g])
    res = 1 << 16
    ticks = np.array([[rng.randrange(res + 1) for i in range(f.dim)] for _ in range(samples)],
                     dtype=float).reshape(samples, f.dim)
    lof = np.array([float(x) for x in lo])
    yf = lof + (np.array([float(x) for x in hi]) - lof) * ticks / res
    # float screen; samples within rounding distance of a tie are decided exactly
    gv = _float_values(g, yf)
    ff, gf = _float_values(f, yf).max(axis=1), gv.max(axis=1)
    tol = 1e-9 * (1.0 + np.abs(ff) + np.abs(gf) + np.abs(yf).sum(axis=1) * _slope_size([f, g]))
    second = np.sort(gv, axis=1)[:, -2] if len(g.pieces) > 1 else gf - np.inf
    screen = _FloatScreen(g.pieces)
    verdicts: dict[tuple[int, ...], list[tuple[Vec, bool]]] = {}
    report = ComparisonReport("vacuous-pass", 0, 0)
    for j in range(samples):
        if gf[j] - ff[j] < -tol[j]:
            continue
        y = None
        if gf[j] - ff[j] <= tol[j]:
            y = _exact_sample(lo, hi, ticks[j], res)
            if not f(y) < g(y):
                continue
        report.samples_in_omega += 1
        if gf[j] - second[j] > tol[j]:
            act = (int(np.argmax(gv[j])),)
        else:
            y = y or _exact_sample(lo, hi, ticks[j], res)
            act = tuple(screen.active(y)[0])
        if act not in verdicts:
            verdicts[act] = _slope_verdicts(f, g, body, [g.pieces[i][0] for i in act])
        for h, ok in verdicts[act]:
            report.slopes_checked += 1
            if not ok:
                report.counterexamples.append((y or _exact_sample(lo, hi, ticks[j], res), h))
    if report.samples_in_omega:
        report.status = "fail" if report.counterexamples else "pass"
    return report


@dataclass
class AtomMatch:
    gathered: list[float]  # mass collected near each reference atom
    max_location_error: float
    debris_mass: float  # mass farther than the snap tolerance from every reference atom

    def max_relative_error(self, reference: DiscreteMeasure) -> float:
        return max(abs(g - float(m)) / float(m) for g, m in zip(self.gathered, reference.masses))


def match_atoms(measure: DiscreteMeasure, reference: DiscreteMeasure, snap_tol: float,
                lattice: Sequence[Sequence] | None = None) -> AtomMatch:
    """Assign each atom of ``measure`` to the nearest reference atom (sup norm).

    With ``lattice`` (columns generate a lattice) distances are taken modulo it.
    Rounded reconstructions split vertices into tight clusters; this gathers them.
    """
    ref = np.array([[float(x) for x in p] for p in reference.points])
    lat = np.array([[float(x) for x in r] for r in lattice]) if lattice is not None else None
    gathered = [0.0] * len(ref)
    max_loc, debris = 0.0, 0.0
    for p, m in measure.atoms:
        diff = ref - np.array([float(x) for x in p])
        if lat is not None:
            coords = np.linalg.solve(lat, diff.T).T
            diff = (coords - np.round(coords)) @ lat.T
        dist = np.abs(diff).max(axis=1)
        k = int(np.argmin(dist))
        if dist[k] > snap_tol:
            debris += float(m)
            continue
        max_loc = max(max_loc, float(dist[k]))
        gathered[k] += float(m)
    return AtomMatch(gathered, max_loc, debris)
