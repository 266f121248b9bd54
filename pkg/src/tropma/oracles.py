"""Independent oracles, the projective-line example and measure discretization."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from ._exact import InvalidInput, to_fraction
from .convex import MaxAffine, canonical_form, stability_set
from .monge_ampere import DiscreteMeasure
from .polytope import Polytope, box
from .sbp import SbpProblem, SbpSolution, solve_sbp


# ------------------------------------------------------------- projective line

@dataclass(frozen=True)
class P1Example:
    """mu_alpha = (1 - alpha) u^(alpha - 2) du on [1, inf), phi_alpha its solution.

    Convex side: f = phi + g0 with g0(u) = max(-u, 0), so the slopes of f fill
    [-1, 0] (the reflection of the concave picture, whose polytope is [0, 1]).
    """

    alpha: Fraction

    def __post_init__(self):
        if not (0 <= self.alpha < 1):
            raise InvalidInput("alpha must lie in [0, 1)")

    @classmethod
    def of(cls, alpha) -> "P1Example":
        return cls(to_fraction(alpha))

    @property
    def a(self) -> float:
        return float(self.alpha)

    def phi(self, u: float) -> float:
        return p1_solution(self.alpha, u)

    def density(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(u >= 1, (1 - self.a) * np.power(np.maximum(u, 1.0), self.a - 2), 0.0)

    def cdf(self, x: float) -> float:
        """mu([1, x])."""
        return 1.0 - max(x, 1.0) ** (self.a - 1)

    def ppf(self, q: float) -> float:
        return (1.0 - q) ** (1.0 / (self.a - 1))

    def moment(self, lo: float, hi: float) -> float:
        """Integral of u dmu over [lo, hi]."""
        lo, hi = max(lo, 1.0), max(hi, 1.0)
        if self.alpha == 0:
            return math.log(hi) - math.log(lo)
        return (1 - self.a) / self.a * (hi ** self.a - lo ** self.a)


def p1_solution(alpha, u: float) -> float:
    """phi_alpha: 1 on u <= 0, 1 - u on [0, 1], (1 - u^alpha)/alpha (or -log u) after."""
    a = float(alpha)
    if not (0 <= a < 1):
        raise InvalidInput("alpha must lie in [0, 1)")
    if u == math.inf:
        return -math.inf
    if u <= 0:
        return 1.0
    if u <= 1:
        return 1.0 - u
    if a == 0:
        return -math.log(u)
    return (1.0 - u ** a) / a


def p1_measure_mass(alpha, a, b=math.inf):
    """(1 - alpha) int_a^b u^(alpha - 2) du = a^(alpha-1) - b^(alpha-1); exact when possible."""
    al = to_fraction(alpha)
    if not (0 <= al < 1):
        raise InvalidInput("alpha must lie in [0, 1)")
    lo = max(to_fraction(a), Fraction(1)) if a != math.inf else None
    if lo is None:
        return Fraction(0)
    hi = None if b == math.inf else to_fraction(b)
    if hi is not None and hi < lo:
        raise InvalidInput("need a <= b")
    e = al - 1

    def power(x: Fraction):
        if x == 1:
            return Fraction(1)
        if e.denominator == 1:
            return x ** int(e)
        return float(x) ** float(e)

    upper = Fraction(0) if hi is None else power(hi)
    return power(lo) - upper


def p1_energy_probe(alpha, cutoff: float) -> float:
    """int_1^U |phi_alpha| dmu_alpha, integrated in log coordinates."""
    if cutoff <= 1:
        raise InvalidInput("cutoff must exceed 1")
    ex = P1Example.of(alpha)

    def integrand(s: float) -> float:
        u = math.exp(s)
        return abs(ex.phi(u)) * float(ex.density(u)) * u

    top = math.log(cutoff)
    edges = np.linspace(0.0, top, int(top) + 2)
    return float(sum(integrate.quad(integrand, lo, hi, epsabs=1e-13, epsrel=1e-12)[0]
                     for lo, hi in zip(edges[:-1], edges[1:])))


# -------------------------------------------------------------- discretization

def quantile_discretize(density: Callable, lo: float, hi: float, m: int,
                        cdf: Callable | None = None, ppf: Callable | None = None,
                        moment: Callable | None = None) -> DiscreteMeasure:
    """m equal-mass atoms at the conditional means of the quantile bins of [lo, hi].

    ``cdf(x)``, ``ppf(q)`` and ``moment(a, b)`` (integral of u against the
    density) are used when given; otherwise they are computed numerically.
    """
    if m < 1:
        raise InvalidInput("need at least one atom")
    if not hi > lo:
        raise InvalidInput("need lo < hi")
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            total = integrate.quad(density, lo, hi, limit=200)[0] if cdf is None else \
                cdf(hi) - cdf(lo)
        except integrate.IntegrationWarning as exc:
            raise InvalidInput(f"density is not integrable: {exc}") from exc
    if not np.isfinite(total) or total <= 0:
        raise InvalidInput("density must have finite positive mass")
    base = cdf(lo) if cdf is not None else 0.0
    if cdf is None:
        def cdf(x: float) -> float:
            return integrate.quad(density, lo, x, limit=200)[0]
    if ppf is None:
        def ppf(q: float) -> float:
            return optimize.brentq(lambda x: cdf(x) - q, lo, hi, xtol=1e-14, rtol=1e-14)
    if moment is None:
        def moment(a: float, b: float) -> float:
            return integrate.quad(lambda u: u * density(u), a, b, limit=200)[0]
    edges = [lo] + [ppf(base + total * k / m) for k in range(1, m)] + [hi]
    mass = Fraction(total).limit_denominator(10**15) / m
    atoms = []
    for a, b in zip(edges[:-1], edges[1:]):
        centre = moment(a, b) / (total / m)
        atoms.append(((Fraction(centre).limit_denominator(10**12),), mass))
    return DiscreteMeasure.of(1, atoms)


@dataclass
class P1Result:
    alpha: Fraction
    m: int
    solution: SbpSolution
    points: list[float]
    recovered: list[float]
    exact: list[float]

    @property
    def error(self) -> float:
        return max(abs(r - e) for r, e in zip(self.recovered, self.exact))


def p1_measure(alpha, m: int, cutoff: int = 1000) -> DiscreteMeasure:
    """Discretized mu_alpha on [1, U] plus one atom at U carrying the exact tail."""
    ex = P1Example.of(alpha)
    inner = quantile_discretize(ex.density, 1.0, float(cutoff), m, ex.cdf, ex.ppf, ex.moment)
    tail = p1_measure_mass(alpha, cutoff)
    tail = tail if isinstance(tail, Fraction) else Fraction(tail).limit_denominator(10**15)
    atoms = list(inner.atoms)
    # the inner total is float-rounded; fix it so the whole mass is exactly 1
    scale_inner = (1 - tail) / inner.total
    atoms = [(p, w * scale_inner) for p, w in atoms] + [((Fraction(cutoff),), tail)]
    return DiscreteMeasure.of(1, atoms)


def p1_pipeline(alpha, m: int, cutoff: int = 1000, points: Sequence[float] = (0, 1, 2, 5, 10),
                tol: float = 1e-7) -> P1Result:
    """Solve the projective-line problem from m atoms and compare with phi_alpha.

    The recovered phi = f - g0 is normalized by phi(0) = 1, matching the closed form.
    """
    mu = p1_measure(alpha, m, cutoff)
    sol = solve_sbp(SbpProblem(box([-1], [0]), mu, tolerance=tol))
    f = sol.phi

    def phi(u: float) -> float:
        return float(f.evaluate_float([[u]])[0]) - max(-u, 0.0)

    shift = 1.0 - phi(0.0)
    rec = [phi(u) + shift for u in points]
    exact = [p1_solution(alpha, u) for u in points]
    return P1Result(to_fraction(alpha), m, sol, list(points), rec, exact)


# ------------------------------------------------------------------- oracles

def brute_force_vertices(f: MaxAffine) -> list[np.ndarray]:
    """Points where n + 1 pieces tie at the top, by solving every subset."""
    n = f.dim
    m = np.array([[float(x) for x in s] for s, _ in f.pieces])
    c = np.array([float(x) for _, x in f.pieces])
    out = []
    for subset in combinations(range(len(c)), n + 1):
        a = m[list(subset[1:])] - m[subset[0]]
        if abs(np.linalg.det(a)) < 1e-12:
            continue
        u = np.linalg.solve(a, c[subset[0]] - c[list(subset[1:])])
        vals = m @ u + c
        if vals.max() - vals[subset[0]] <= 1e-9 * (1 + np.abs(vals).max()):
            if not any(np.allclose(u, v, atol=1e-9) for v in out):
                out.append(u)
    return out


@dataclass
class McEstimate:
    estimate: float
    stderr: float
    hits: int
    samples: int


def _sample_polytope(body: Polytope, k: int, rng: np.random.Generator) -> np.ndarray:
    verts = np.array([[float(x) for x in v] for v in body.vertices])
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    a, b = body.to_float_halfspaces()
    out = []
    while len(out) < k:
        x = rng.uniform(lo, hi, size=(max(k, 64), len(lo)))
        ok = (x @ a.T <= b + 1e-12).all(axis=1)
        out.extend(x[ok])
    return np.array(out[:k])


def mc_subgradient_volume(f, region_lo: Sequence[float], region_hi: Sequence[float],
                          n_samples: int = 20000, seed: int = 0,
                          body: Polytope | None = None) -> McEstimate:
    """Monte Carlo estimate of MA(f)(E) for the box E = [region_lo, region_hi].

    Slopes x are drawn uniformly from the stability set; each x is assigned to
    the maximizer of <x, u> - f(u), found among brute-force vertices for a
    MaxAffine and by numerical optimization for a smooth oracle (then ``body``
    must be given).
    """
    rng = np.random.default_rng(seed)
    lo = np.asarray(region_lo, dtype=float)
    hi = np.asarray(region_hi, dtype=float)
    if isinstance(f, MaxAffine):
        f = canonical_form(f)
        body = stability_set(f)
        verts = brute_force_vertices(f)
        if not verts:
            return McEstimate(0.0, 0.0, 0, n_samples)
        vs = np.array(verts)
        fv = f.evaluate_float(vs)

        def argmax(x: np.ndarray) -> np.ndarray:
            return vs[int(np.argmax(vs @ x - fv))]
    else:
        if body is None:
            raise InvalidInput("a smooth oracle needs the stability set")

        def argmax(x: np.ndarray) -> np.ndarray:
            res = optimize.minimize(lambda u: float(f(u)) - float(u @ x), np.zeros(len(x)),
                                    method="BFGS", options={"gtol": 1e-10})
            return res.x
    n = body.dim
    total = math.factorial(n) * float(body.volume())
    xs = _sample_polytope(body, n_samples, rng)
    hits = 0
    for x in xs:
        u = argmax(x)
        if np.all(u >= lo - 1e-12) and np.all(u <= hi + 1e-12):
            hits += 1
    p = hits / n_samples
    return McEstimate(total * p, total * math.sqrt(p * (1 - p) / n_samples), hits, n_samples)


def fd_hessian_ma(f: Callable, point: Sequence[float], h: float = 1e-4) -> float:
    """n! det of the central finite-difference Hessian; NaN if the stencil fails."""
    x = np.asarray(point, dtype=float)
    n = len(x)
    hess = np.zeros((n, n))
    e = np.eye(n) * h
    try:
        for i in range(n):
            for j in range(n):
                hess[i, j] = (f(x + e[i] + e[j]) - f(x + e[i] - e[j])
                              - f(x - e[i] + e[j]) + f(x - e[i] - e[j])) / (4 * h * h)
    except (ValueError, ZeroDivisionError, OverflowError):
        return math.nan
    if not np.all(np.isfinite(hess)):
        return math.nan
    return math.factorial(n) * float(np.linalg.det(hess))
