"""Second boundary problem: convex PL phi with MA(phi) = mu and slopes filling a body.

The unknowns are the offsets c_i of the dual function max_i <x, p_i> - c_i on
the body. Its Laguerre cells C_i carry the masses n! vol(C_i); damped Newton
on the concave dual functional drives them to the prescribed masses.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Callable

import numpy as np

from ._cells import (CellGeom, ccw_polygon, clip_general, clip_interval, clip_polygon,
                     polygon_edge_labels)
from ._exact import InvalidInput, NoConvergence, dot
from .convex import MaxAffine, canonical_form, stability_set
from .monge_ampere import DiscreteMeasure, ma_measure, match_atoms
from .polytope import Polytope

log = logging.getLogger(__name__)

MASS_PRECHECK = Fraction(1, 10**12)


@dataclass
class SbpProblem:
    body: Polytope
    measure: DiscreteMeasure
    tolerance: float = 1e-9
    max_iter: int = 200
    anchor: int | None = None
    rescale: bool = False

    def prepared(self) -> tuple[np.ndarray, np.ndarray, int, DiscreteMeasure]:
        """Float sites, float masses, anchor index and the (possibly rescaled) measure."""
        body, mu = self.body, self.measure
        n = body.dim
        if mu.dim != n:
            raise InvalidInput("measure and body dimensions differ")
        if body.affine_dim != n:
            raise InvalidInput("body must be full-dimensional")
        if not mu.atoms:
            raise InvalidInput("measure has no atoms")
        if any(m <= 0 for m in mu.masses):
            raise InvalidInput("all masses must be strictly positive")
        expected = factorial(n) * body.volume()
        gap = abs(mu.total - expected) / expected
        if gap > MASS_PRECHECK:
            if not self.rescale:
                raise InvalidInput(
                    f"total mass {float(mu.total)} differs from n!vol(body) = {float(expected)}")
            mu = mu.scaled(expected / mu.total)
        pts = np.array([[float(x) for x in p] for p in mu.points])
        masses = np.array([float(m) for m in mu.masses])
        masses *= float(expected) / masses.sum()
        anchor = self.anchor
        if anchor is None:
            anchor = int(np.argmax(masses))  # atoms are sorted, so ties go to the smallest point
        return pts, masses, anchor, mu


@dataclass
class LaguerreCell:
    index: int
    site: np.ndarray
    geom: CellGeom

    @property
    def volume(self) -> float:
        return self.geom.volume

    @property
    def vertices(self) -> np.ndarray:
        return self.geom.vertices


@dataclass
class SbpSolution:
    dual_offsets: np.ndarray
    phi: MaxAffine
    cells: list[LaguerreCell]
    residuals: np.ndarray
    iterations: int
    sites: np.ndarray
    measure: DiscreteMeasure
    history: list[float] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max())


# ------------------------------------------------------------------ Laguerre cells

class _Body:
    """Float view of a full-dimensional body used for clipping."""

    def __init__(self, body: Polytope):
        if body.affine_dim != body.dim:
            raise InvalidInput("body must be full-dimensional")
        self.n = body.dim
        self.a, self.b = body.to_float_halfspaces()
        self.verts = np.array([[float(x) for x in v] for v in body.vertices])
        if self.n == 1:
            self.lo, self.hi = float(self.verts.min()), float(self.verts.max())
        elif self.n == 2:
            self.poly = ccw_polygon(self.verts)
            self.labels = polygon_edge_labels(self.poly, self.a, self.b)
        geom = self.cell(np.zeros((0, self.n)), np.zeros(0))
        self.volume = geom.volume
        self.centroid = geom.centroid
        norms = np.linalg.norm(self.a, axis=1)
        self.inradius = float(((self.b - self.a @ self.centroid) / norms).min())

    def cell(self, a: np.ndarray, b: np.ndarray) -> CellGeom:
        if self.n == 1:
            return clip_interval(self.lo, self.hi, a[:, 0], b)
        if self.n == 2:
            return clip_polygon(self.poly, self.labels, a, b)
        labels = list(range(len(b))) + [-1 - k for k in range(len(self.b))]
        return clip_general(np.vstack([a, self.a]), np.r_[b, self.b], labels)


def _cells_for(body: _Body, sites: np.ndarray, c: np.ndarray) -> list[CellGeom]:
    out = []
    n_sites = len(sites)
    for i in range(n_sites):
        mask = np.arange(n_sites) != i
        a = sites[mask] - sites[i]
        b = c[mask] - c[i]
        geom = body.cell(a, b)
        idx = np.flatnonzero(mask)
        geom.facets = {(int(idx[k]) if k >= 0 else k): w for k, w in geom.facets.items()}
        out.append(geom)
    return out


def laguerre_cells(body: Polytope, sites, offsets) -> list[LaguerreCell]:
    """C_i = {x in body : <x,p_i> - c_i >= <x,p_j> - c_j for all j}."""
    fb = _Body(body)
    pts = np.atleast_2d(np.asarray(sites, dtype=float))
    c = np.asarray(offsets, dtype=float)
    if pts.shape[1] != body.dim or len(c) != len(pts):
        raise InvalidInput("sites/offsets shape mismatch")
    return [LaguerreCell(i, pts[i], g) for i, g in enumerate(_cells_for(fb, pts, c))]


# ------------------------------------------------------------------- Newton engine

@dataclass
class _Eval:
    value: float
    grad: np.ndarray  # n! vol(C_i) - nu_i
    hess: np.ndarray
    vols: np.ndarray  # n! vol(C_i)
    cells: list[CellGeom]


def damped_newton(evaluate: Callable[[np.ndarray], _Eval], c0: np.ndarray, masses: np.ndarray,
                  anchor: int, tol: float, max_iter: int, history: list[float] | None = None
                  ) -> tuple[np.ndarray, _Eval, int]:
    """Maximize a concave functional with gradient n! vol(C_i) - nu_i."""
    c = c0.copy()
    cur = evaluate(c)
    floor = 0.5 * min(masses.min(), cur.vols.min())
    if cur.vols.min() <= 0:
        raise InvalidInput("initial offsets leave an empty cell")
    target = tol * masses.min()
    free = np.arange(len(c)) != anchor
    for it in range(max_iter + 1):
        res = np.abs(cur.grad)
        if history is not None:
            history.append(float(res.max()))
        if res.max() <= target:
            return c, cur, it
        if it == max_iter:
            break
        h = cur.hess[np.ix_(free, free)]
        try:
            step_free = np.linalg.solve(h, -cur.grad[free])
        except np.linalg.LinAlgError:
            step_free = np.linalg.lstsq(h, -cur.grad[free], rcond=None)[0]
        step = np.zeros_like(c)
        step[free] = step_free
        t = 1.0
        slack = 1e-13 * (1.0 + abs(cur.value))
        accepted = False
        for _ in range(60):
            trial = evaluate(c + t * step)
            if trial.vols.min() >= floor and trial.value >= cur.value - slack:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            log.debug("line search stalled at residual %.3e", res.max())
            break
        c, cur = c + t * step, trial
    raise NoConvergence(f"no convergence after {max_iter} iterations "
                        f"(max residual {np.abs(cur.grad).max():.3e})",
                        best=c, residuals=np.abs(cur.grad))


def _hessian(cells: list[CellGeom], sites: np.ndarray, nfact: int) -> np.ndarray:
    n_sites = len(sites)
    h = np.zeros((n_sites, n_sites))
    for i, g in enumerate(cells):
        for j, area in g.facets.items():
            if j < 0 or j == i:
                continue
            w = nfact * area / np.linalg.norm(sites[i] - sites[j])
            h[i, j] += w
            h[i, i] -= w
    return (h + h.T) / 2


def _sbp_evaluator(body: _Body, sites: np.ndarray, masses: np.ndarray):
    nfact = factorial(body.n)

    def evaluate(c: np.ndarray) -> _Eval:
        cells = _cells_for(body, sites, c)
        vols = np.array([g.volume for g in cells]) * nfact
        integral = sum(float(g.moment1 @ sites[i]) - c[i] * g.volume for i, g in enumerate(cells))
        value = -float(masses @ c) - nfact * integral
        return _Eval(value, vols - masses, _hessian(cells, sites, nfact), vols, cells)

    return evaluate


def dual_functional(body: Polytope, sites, masses, offsets) -> tuple[float, np.ndarray]:
    """Concave dual value and its gradient n! vol(C_i) - nu_i at the offsets."""
    ev = _sbp_evaluator(_Body(body), np.atleast_2d(np.asarray(sites, float)),
                        np.asarray(masses, float))(np.asarray(offsets, float))
    return ev.value, ev.grad


def initial_offsets(body: _Body, sites: np.ndarray, seed: int | None = None) -> np.ndarray:
    """Offsets whose cells are scaled Voronoi cells of the sites, all nonempty.

    With c_i = <xbar, p_i> + k |p_i - pbar|^2 / 2 the cell of p_i is the preimage
    of its Voronoi cell under x -> pbar + (x - xbar) / k; a small k puts every
    site inside the image of the body. A seeded perturbation of the power weights
    below a quarter of the squared separation keeps every cell nonempty.
    """
    xbar = body.centroid
    pbar = sites.mean(axis=0)
    spread = float(np.linalg.norm(sites - pbar, axis=1).max())
    kappa = body.inradius / (2 * spread) if spread > 0 else 1.0
    c = sites @ xbar + kappa * 0.5 * ((sites - pbar) ** 2).sum(axis=1)
    if seed is not None and len(sites) > 1:
        rng = np.random.default_rng(seed)
        d = np.linalg.norm(sites[:, None, :] - sites[None, :, :], axis=2)
        sep2 = float(d[d > 0].min()) ** 2
        weights = rng.uniform(-sep2 / 4, sep2 / 4, len(sites))
        c = c + 0.5 * kappa * weights
    return c


# --------------------------------------------------------------- reconstruction

def _snap(x: np.ndarray, body: Polytope, tol: float = 1e-9, max_den: int = 10**6
          ) -> tuple[Fraction, ...]:
    for v in body.vertices:
        if np.abs(x - np.array([float(t) for t in v])).max() <= tol:
            return v
    xr = tuple(Fraction(float(t)).limit_denominator(max_den) for t in x)
    for a, b in body.halfspaces:
        gap = dot(a, xr) - b
        fa = np.array([float(t) for t in a])
        if abs(float(gap)) <= tol * (1 + np.linalg.norm(fa)):
            norm2 = dot(a, a)
            xr = tuple(t - gap / norm2 * ai for t, ai in zip(xr, a))
    return xr


def reconstruct_phi(body: Polytope, sites: np.ndarray, c: np.ndarray,
                    cells: list[CellGeom], max_den: int = 10**6) -> MaxAffine:
    """phi(u) = max over subdivision vertices x of <x, u> - phi*(x)."""
    seen: dict[tuple, np.ndarray] = {}
    for g in cells:
        for x in g.vertices:
            key = tuple(np.round(x, 9))
            seen.setdefault(key, x)
    pieces = []
    for x in seen.values():
        xr = _snap(x, body, max_den=max_den)
        xf = np.array([float(t) for t in xr])
        star = float((sites @ xf - c).max())
        pieces.append((xr, Fraction(-star).limit_denominator(10**12)))
    return canonical_form(MaxAffine(body.dim, tuple(pieces)))


# ----------------------------------------------------------------------- solver

def solve_sbp(problem: SbpProblem, seed: int | None = None) -> SbpSolution:
    sites, masses, anchor, mu = problem.prepared()
    fb = _Body(problem.body)
    if len(np.unique(sites, axis=0)) != len(sites):
        raise InvalidInput("sites must be pairwise distinct")
    c0 = initial_offsets(fb, sites, seed)
    c0 -= c0[anchor]
    history: list[float] = []
    evaluate = _sbp_evaluator(fb, sites, masses)
    c, ev, iters = damped_newton(evaluate, c0, masses, anchor, problem.tolerance,
                                 problem.max_iter, history)
    c = c - c[anchor]
    phi = reconstruct_phi(problem.body, sites, c, ev.cells)
    cells = [LaguerreCell(i, sites[i], g) for i, g in enumerate(ev.cells)]
    return SbpSolution(c, phi, cells, np.abs(ev.grad), iters, sites, mu, history)


@dataclass
class SbpReport:
    slopes_inside: bool
    witness: tuple | None
    volume_ratio: float
    volume_ok: bool
    max_mass_error: float
    max_location_error: float
    debris_mass: float
    atoms_ok: bool

    @property
    def ok(self) -> bool:
        return self.slopes_inside and self.volume_ok and self.atoms_ok


def verify_sbp(sol: SbpSolution | MaxAffine, problem: SbpProblem, tol: float = 1e-6,
               snap_tol: float = 1e-6) -> SbpReport:
    """Containment of slopes, full stability volume and MA(phi) against mu."""
    phi = sol.phi if isinstance(sol, SbpSolution) else sol
    body = problem.body
    outside = [m for m, _ in phi.pieces if not body.contains(m)]
    delta_phi = stability_set(phi)
    ratio = float(delta_phi.volume() / body.volume())
    mu = problem.measure
    ma = ma_measure(phi)
    if problem.rescale:
        ma = ma.scaled(mu.total / (factorial(body.dim) * body.volume()))
    match = match_atoms(ma, mu, snap_tol)
    max_mass = match.max_relative_error(mu)
    debris = match.debris_mass
    max_loc = match.max_location_error
    ok = max_mass <= tol and debris <= tol * float(min(mu.masses))
    return SbpReport(not outside, outside[0] if outside else None, ratio,
                     abs(ratio - 1.0) <= tol, max_mass, max_loc, debris, ok)

