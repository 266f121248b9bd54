"""Polarized tropical abelian varieties and periodic Monge-Ampere problems.

A PTAV is stored by a rational basis L of the lattice (columns) and an integer
polarization matrix P; the bilinear form is b(x, y) = x^T B y with B = P L^-1.
Functions f on N_R with f(w + l) = f(w) + z_l(w), z_l(w) = Q(w + l) - Q(w),
Q = b(x, x)/2, are kept as finitely many base pieces closed under translates.
"""

from __future__ import annotations

import itertools
import logging
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from sympy import ZZ
from sympy.polys.matrices import DomainMatrix

from ._cells import CellGeom, clip_general, clip_interval, clip_polygon
from ._exact import (InvalidInput, NoConvergence, Vec, add, det, dot, inverse, matmul, matvec,
                     sub, to_fraction, transpose, vec)
from .convex import (MaxAffine, Piece, RegionExceeded, _descend, _FloatScreen,
                     supporting_piece, walk_vertices)
from .monge_ampere import DiscreteMeasure
from .sbp import _Eval, damped_newton

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PolarizedTropAV:
    n: int
    lambda_basis: tuple[Vec, ...]  # rows of L; the columns generate the lattice
    polarization: tuple[tuple[int, ...], ...]

    @classmethod
    def of(cls, lambda_basis: Sequence[Sequence], polarization: Sequence[Sequence]
           ) -> "PolarizedTropAV":
        lb = tuple(vec(r) for r in lambda_basis)
        n = len(lb)
        if n == 0 or any(len(r) != n for r in lb):
            raise InvalidInput("lambda_basis must be a square matrix")
        pol = []
        for r in polarization:
            row = []
            for x in r:
                fx = to_fraction(x)
                if fx.denominator != 1:
                    raise InvalidInput("polarization entries must be integers")
                row.append(int(fx))
            pol.append(tuple(row))
        if len(pol) != n or any(len(r) != n for r in pol):
            raise InvalidInput("polarization must be n x n")
        return cls(n, lb, tuple(pol))

    @property
    def form_matrix(self) -> list[list[Fraction]]:
        """B with b(x, y) = x^T B y in standard coordinates of N_R."""
        return matmul([[Fraction(x) for x in r] for r in self.polarization],
                      inverse(self.lambda_basis))

    @property
    def gram(self) -> list[list[Fraction]]:
        """B_kl = b(l_k, l_l) on the lattice generators, equal to L^T P."""
        return matmul(transpose(self.lambda_basis),
                      [[Fraction(x) for x in r] for r in self.polarization])

    @property
    def d(self) -> int:
        return abs(int(det([[Fraction(x) for x in r] for r in self.polarization])))

    def generators(self) -> list[Vec]:
        return [tuple(r[k] for r in self.lambda_basis) for k in range(self.n)]

    def lattice_point(self, k: Sequence[int]) -> Vec:
        return matvec(self.lambda_basis, [Fraction(x) for x in k])


@dataclass
class PtavReport:
    valid: bool
    d: int
    degree: int
    failed_axiom: int | None = None
    reason: str = ""


def validate_ptav(p: PolarizedTropAV) -> PtavReport:
    if det(p.lambda_basis) == 0:
        return PtavReport(False, 0, 0, 3, "lambda_basis is singular, not a lattice")
    d = p.d
    if d < 1:
        return PtavReport(False, 0, 0, 4, "polarization is not injective (det = 0)")
    g = p.gram
    n = p.n
    if any(g[i][j] != g[j][i] for i in range(n) for j in range(n)):
        return PtavReport(False, d, d * d, 5, "b is not symmetric")
    for k in range(1, n + 1):
        if det([row[:k] for row in g[:k]]) <= 0:
            return PtavReport(False, d, d * d, 5, f"leading minor {k} is not positive")
    return PtavReport(True, d, d * d)


def _require_valid(p: PolarizedTropAV) -> None:
    rep = validate_ptav(p)
    if not rep.valid:
        raise InvalidInput(f"invalid PTAV, axiom ({rep.failed_axiom}): {rep.reason}")


def canonical_volume(p: PolarizedTropAV) -> Fraction:
    _require_valid(p)
    return Fraction(math.factorial(p.n) * p.d)


def random_ptav(n: int, d: int = 1, seed: int = 0, size: int = 3) -> PolarizedTropAV:
    """L = P^-T G with G symmetric positive definite and |det P| = d."""
    rng = random.Random(seed)
    while True:
        u = [[rng.randint(-1, 1) if i != j else 1 for j in range(n)] for i in range(n)]
        u = [[u[i][j] if j >= i else 0 for j in range(n)] for i in range(n)]  # unimodular
        pmat = [[Fraction(x) for x in r] for r in u]
        pmat[0] = [x * d for x in pmat[0]]
        a = [[Fraction(rng.randint(-size, size)) for _ in range(n)] for _ in range(n)]
        g = matmul(transpose(a), a)
        for i in range(n):
            g[i][i] += 1
        lam = matmul(transpose(inverse(pmat)), g)
        ptav = PolarizedTropAV.of(lam, pmat)
        if validate_ptav(ptav).valid:
            return ptav


# --------------------------------------------------------------------- cocycle

@dataclass(frozen=True)
class Cocycle:
    ptav: PolarizedTropAV
    b_matrix: tuple[Vec, ...]

    @classmethod
    def of(cls, p: PolarizedTropAV) -> "Cocycle":
        _require_valid(p)
        return cls(p, tuple(tuple(r) for r in p.form_matrix))

    def b(self, x: Sequence, y: Sequence) -> Fraction:
        return dot(vec(x), matvec(self.b_matrix, vec(y)))

    def q(self, x: Sequence) -> Fraction:
        return self.b(x, x) / 2

    def z(self, lam: Sequence, w: Sequence) -> Fraction:
        """z_l(w) = Q(w + l) - Q(w) = b(w, l) + b(l, l)/2."""
        return self.b(w, lam) + self.q(lam)

    def translate_piece(self, piece: Piece, k: Sequence[int]) -> Piece:
        """Piece w -> h(w - l) + z_l(w - l) for l = L k."""
        m, c = piece
        lam = self.ptav.lattice_point(k)
        slope = add(m, matvec(self.b_matrix, lam))
        return slope, c - dot(m, lam) - self.q(lam)

    def translate_pieces(self, piece: Piece, ks: np.ndarray) -> list[Piece]:
        """translate_piece for many k at once: slope m + P k, offset c - <L^T m, k> - k^T G k / 2."""
        m, c = piece
        ks = np.asarray(ks, dtype=np.int64).reshape(-1, self.ptav.n)
        lt_m = matvec(transpose(self.ptav.lambda_basis), m)
        half = [[x / 2 for x in r] for r in self.ptav.gram]
        den = math.lcm(c.denominator, *(x.denominator for x in lt_m),
                       *(x.denominator for r in half for x in r))
        lin = [int(x * den) for x in lt_m]
        quad = [[int(x * den) for x in r] for r in half]
        reach = int(np.abs(ks).max()) if len(ks) else 0
        n = self.ptav.n
        size = abs(int(c * den)) + n * reach * max(map(abs, lin)) \
            + n * n * reach * reach * max(abs(x) for r in quad for x in r)
        dtype = np.int64 if size < 2**62 else object
        kd = ks.astype(dtype)
        nums = int(c * den) - kd @ np.array(lin, dtype=dtype) \
            - ((kd @ np.array(quad, dtype=dtype)) * kd).sum(axis=1)
        slopes = ks @ np.array(self.ptav.polarization, dtype=np.int64).T
        return [(tuple(mi + int(s) for mi, s in zip(m, row)), Fraction(int(v), den))
                for row, v in zip(slopes, nums)]

    def reduce(self, w: Sequence) -> tuple[Vec, tuple[int, ...]]:
        """w = w0 + L k with w0 in the half-open fundamental parallelepiped."""
        coords = matvec(self._linv, vec(w))
        k = tuple(math.floor(x) for x in coords)
        w0 = sub(vec(w), self.ptav.lattice_point(k))
        return w0, k

    def base_of(self, m: Vec, c: Fraction) -> Piece:
        """(m0, c0) with m0 in the half-open slope domain whose translate is (m, c)."""
        if len(m) != self.ptav.n:
            raise InvalidInput("piece dimension mismatch")
        pol = [[Fraction(x) for x in r] for r in self.ptav.polarization]
        k = tuple(math.floor(x) for x in matvec(inverse(pol), m))
        lam = self.ptav.lattice_point(k)
        m0 = sub(m, matvec(pol, k))
        return m0, c + dot(m0, lam) + self.q(lam)

    @property
    def _linv(self) -> list[list[Fraction]]:
        cache = self.__dict__.get("_linv_cache")
        if cache is None:
            cache = inverse(self.ptav.lambda_basis)
            object.__setattr__(self, "_linv_cache", cache)
        return cache

    def domain_vertices(self, lo: Fraction | int = 0, hi: Fraction | int = 1) -> list[Vec]:
        """Vertices of L [lo, hi]^n."""
        n = self.ptav.n
        return [self.ptav.lattice_point(corner)
                for corner in itertools.product((lo, hi), repeat=n)]

    def float_data(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        lf = np.array([[float(x) for x in r] for r in self.ptav.lambda_basis])
        bf = np.array([[float(x) for x in r] for r in self.b_matrix])
        pf = np.array([[float(x) for x in r] for r in self.ptav.polarization])
        return lf, bf, pf


# ------------------------------------------------------------------ periodic PL

def _box(r: int, n: int):
    return itertools.product(range(-r, r + 1), repeat=n)


def _translate_radius(z: Cocycle, piece: Piece, region: list[Vec]) -> int:
    """Radius beyond which every translate is below the piece itself on region.

    Translate minus piece is b(w, l) - <m, l> - b(l, l)/2; it can be positive only
    for |l - y|_b < |y|_b with y = w - B^-1 m, so |l|_b < 2 max |y|_b.
    """
    lf, bf, _ = z.float_data()
    m = np.array([float(x) for x in piece[0]])
    shift = np.linalg.solve(bf, m)
    r = max(math.sqrt(max(float(y @ bf @ y), 0.0))
            for y in (np.array([float(x) for x in w]) - shift for w in region))
    # |k|_inf <= ||L^-1 B^-1/2||_{2->inf} |l|_b
    evals, evecs = np.linalg.eigh(bf)
    root_inv = evecs @ np.diag(evals ** -0.5) @ evecs.T
    op = np.abs(np.linalg.solve(lf, root_inv))
    bound = 2 * r * float(np.sqrt((op ** 2).sum(axis=1)).max())
    return int(math.ceil(bound)) + 1


def _lattice_window(z: Cocycle, piece: Piece, wf: np.ndarray, gram: np.ndarray | None = None,
                    pad: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Box of lattice coordinates outside which translate k* beats every translate on region.

    With a_w = L^T(Bw - m), G the Gram matrix and c_w = G^-1 a_w, translate k
    is worth <a_w, k> - k^T G k / 2 = (|c_w|^2 - |k - c_w|^2) / 2 in the G norm.
    c is affine in w, so k can beat k* somewhere on conv(region) only if
    |k - c|_G <= R = max_w |k* - c_w|_G, which bounds each k_i by R sqrt(G^-1_ii).
    The box is widened by ``pad`` plus a rounding slack, so ties are kept.
    """
    lf, bf, _ = z.float_data()
    if gram is None:
        gram = lf.T @ bf @ lf
    a = (wf @ bf - np.array([float(x) for x in piece[0]])) @ lf
    lo, hi, kstar = _windows(np.linalg.solve(gram, a.T).T[None], gram, pad)
    return lo[0], hi[0], kstar[0]


def _windows(c: np.ndarray, gram: np.ndarray, pad: int
             ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """_lattice_window for a batch of regions, given the centres c[region, vertex]."""
    kstar = np.rint(c.mean(axis=1))
    off = c - kstar[:, None, :]
    reach = np.sqrt(np.maximum(np.einsum("rwi,ij,rwj->rw", off, gram, off).max(axis=1), 0.0))
    spread = reach[:, None] * np.sqrt(np.diag(np.linalg.inv(gram)))[None, :]
    slack = 1e-9 * (1.0 + np.abs(c).max(axis=(1, 2))[:, None] + spread)
    lo = np.floor(c.min(axis=1) - spread - slack).astype(np.int64) - pad
    hi = np.ceil(c.max(axis=1) + spread + slack).astype(np.int64) + pad
    return lo, hi, kstar.astype(np.int64)


def _int_box(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))


def _shell_dominated(z: Cocycle, piece: Piece, region: list[Vec],
                     lo: np.ndarray, hi: np.ndarray, kstar: np.ndarray) -> bool:
    """Exact: translates on the layer just outside the window are <= translate k* on conv(region).

    In lattice coordinates translate k is worth <L^T(Bw - m), k> - k^T G k / 2
    (up to terms common to all k), so it suffices to test the region vertices;
    done in scaled integers.
    """
    lt = transpose(z.ptav.lambda_basis)
    gram = z.ptav.gram
    lin = [matvec(lt, sub(matvec(z.b_matrix, w), piece[0])) for w in region]
    den = math.lcm(*(x.denominator for row in lin + gram for x in row))
    lin_i = [[int(x * 2 * den) for x in row] for row in lin]
    gram_i = [[int(x * den) for x in row] for row in gram]
    ks = _int_box(lo - 1, hi + 1)
    ks = np.vstack([ks[((ks < lo) | (ks > hi)).any(axis=1)], kstar[None, :]])
    size = max(1, *(abs(x) for row in lin_i + gram_i for x in row))
    reach = int(np.abs(ks).max())
    dtype = np.int64 if size * (len(lo) * reach + 1) ** 2 < 2**60 else object
    ks = ks.astype(dtype)
    worth = ks @ np.array(lin_i, dtype=dtype).T \
        - ((ks @ np.array(gram_i, dtype=dtype)) * ks).sum(axis=1)[:, None]
    return bool((worth[:-1] <= worth[-1][None, :]).all())


@dataclass(frozen=True)
class PeriodicPL:
    """f(w) = sup over base pieces and all their lattice translates."""

    cocycle: Cocycle
    base_pieces: tuple[Piece, ...]
    radius: int

    @classmethod
    def of(cls, cocycle: Cocycle, pieces: Sequence[tuple[Sequence, object]]) -> "PeriodicPL":
        best: dict[Vec, Fraction] = {}
        for m, c in pieces:
            m0, c0 = cocycle.base_of(vec(m), to_fraction(c))
            if m0 not in best or c0 > best[m0]:
                best[m0] = c0
        ps = tuple(sorted(best.items()))
        if not ps:
            raise InvalidInput("need at least one piece")
        region = cocycle.domain_vertices()
        radius = max(_translate_radius(cocycle, p, region) for p in ps)
        return cls(cocycle, ps, radius)

    @property
    def dim(self) -> int:
        return self.cocycle.ptav.n

    def pieces_on(self, region: list[Vec]) -> list[Piece]:
        """Translates that can attain the sup somewhere on conv(region).

        Candidates come from a window certificate (translates outside it lie
        below their own base piece on the region; the next layer is re-checked
        exactly). Among them, a translate is dropped when the base piece or a
        neighbouring translate beats it at every region vertex by a margin far
        above rounding error; differences of translates are affine, so vertex
        checks suffice. Keeping extra translates is always safe.
        """
        return self.pieces_on_cells([region], certify=region)

    def pieces_on_cells(self, cells: Sequence[list[Vec]], certify: list[Vec] | None = None
                        ) -> list[Piece]:
        """Union of pieces_on over the cells; filtering cell by cell prunes far more."""
        z = self.cocycle
        n = self.dim
        lf, bf, _ = z.float_data()
        gram = lf.T @ bf @ lf
        steps = np.array([k for k in _box(1, n) if 0 < sum(map(abs, k)) <= 2], dtype=float) @ lf.T
        half_ee = 0.5 * np.einsum("ei,ij,ej->e", steps, bf, steps)
        index: dict[Vec, int] = {}
        idx = np.array([[index.setdefault(w, len(index)) for w in cell] for cell in cells])
        vf = np.array([[float(x) for x in w] for w in index])
        out = []
        for p in self.base_pieces:
            mf = np.array([float(x) for x in p[0]])
            if certify is not None:
                wc = np.array([[float(x) for x in w] for w in certify])
                if not _shell_dominated(z, p, certify, *_lattice_window(z, p, wc, gram)):
                    raise AssertionError("translate window certificate failed")
            centres = np.linalg.solve(gram, ((vf @ bf - mf) @ lf).T).T
            los, his, kstars = _windows(centres[idx], gram, pad=0)
            windows = list(zip(los, his, kstars))
            base, top = los.min(axis=0), his.max(axis=0)
            axes = [np.arange(l, h + 1, dtype=float) for l, h in zip(base, top)]
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
            quad = 0.5 * np.einsum("...i,ij,...j->...", grid, gram, grid)
            a = (vf @ bf - mf) @ lf
            # translates that the cell's k* beats at every cell vertex never attain the sup;
            # <k, a_v> over a box is a sum of per-axis outer products
            pair_c, pair_k = [], []
            for c, (lo, hi, kstar) in enumerate(windows):
                av = a[idx[c]]
                box = tuple(slice(l - b0, h - b0 + 1) for l, h, b0 in zip(lo, hi, base))
                ranges = [np.arange(l, h + 1, dtype=float) for l, h in zip(lo, hi)]
                worth = -quad[box][..., None]
                for i, r in enumerate(ranges):
                    shape = [1] * n + [len(av)]
                    shape[i] = len(r)
                    worth = worth + (r[:, None] * av[None, :, i]).reshape(shape)
                ref = av @ kstar - 0.5 * float(kstar @ gram @ kstar)
                scale = 1e-9 * (1.0 + np.abs(worth).max() + np.abs(ref).max())
                hit = np.argwhere((worth - ref).max(axis=-1) >= -scale)
                pair_c.append(np.full(len(hit), c))
                pair_k.append(hit + lo)
            pair_c = np.concatenate(pair_c)
            ks = np.concatenate(pair_k).astype(float)
            pair_k = np.arange(len(ks))
            y = vf - np.linalg.solve(bf, mf)
            kept: set[tuple[int, ...]] = set()
            for sel in np.array_split(np.arange(len(pair_k)), max(1, len(pair_k) // 1024)):
                lam = ks[pair_k[sel]] @ lf.T
                # margin[k, e, w] = b(y_w - lam_k, e) + b(e, e)/2; translate k-e wins where < 0
                rel = y[idx[pair_c[sel]]] - lam[:, None, :]
                cross = np.swapaxes((rel @ bf) @ steps.T, 1, 2)
                margin = cross + half_ee[None, :, None]
                tol = 1e-9 * (1.0 + np.abs(cross).max(axis=2) + half_ee[None, :])
                beaten = (margin.max(axis=2) < -tol).any(axis=1)
                kept.update(tuple(int(x) for x in k) for k in ks[pair_k[sel][~beaten]])
            out.extend(z.translate_pieces(p, np.array(sorted(kept), dtype=np.int64)))
        return list(dict.fromkeys(out))

    def _fd_pieces(self) -> list[Piece]:
        cache = self.__dict__.get("_fd_cache")
        if cache is None:
            cache = self.pieces_on(self.cocycle.domain_vertices())
            object.__setattr__(self, "_fd_cache", cache)
        return cache

    def __call__(self, w: Sequence) -> Fraction:
        w0, k = self.cocycle.reduce(w)
        val = max(dot(m, w0) + c for m, c in self._fd_pieces())
        return val + self.cocycle.z(self.cocycle.ptav.lattice_point(k), w0)

    def evaluate_direct(self, w: Sequence) -> Fraction:
        """Sup over all translates relevant at w itself, without reduction."""
        wv = vec(w)
        return max(dot(m, wv) + c for m, c in self.pieces_on([wv]))

    def phi(self, w: Sequence) -> Fraction:
        """Periodic part f - Q."""
        return self(w) - self.cocycle.q(w)

    def evaluate_float(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.array([float(self(tuple(Fraction(x) for x in p))) for p in pts])

    def shifted(self, const) -> "PeriodicPL":
        k = to_fraction(const)
        return PeriodicPL(self.cocycle, tuple((m, c + k) for m, c in self.base_pieces),
                          self.radius)


def check_automorphy(f: PeriodicPL, points: Sequence[Sequence], direct: bool = True) -> bool:
    ev = f.evaluate_direct if direct else f
    z = f.cocycle
    for w in points:
        wv = vec(w)
        base = ev(wv)
        for lam in z.ptav.generators():
            if ev(add(wv, lam)) - base != z.z(lam, wv):
                return False
    return True


# -------------------------------------------------------- periodic approximation

def periodic_approximation(f: Callable, cocycle: Cocycle, grid: Sequence[Sequence], eps,
                           grad: Callable | None = None, max_den: int = 10**6,
                           checks: int = 20, seed: int = 0) -> PeriodicPL:
    """Sup of rational supporting pieces at grid points, closed under translates."""
    pts = [vec(p) for p in grid]
    if not pts:
        raise InvalidInput("grid must be nonempty")
    rng = random.Random(seed)
    n = cocycle.ptav.n
    for _ in range(checks):
        w = tuple(Fraction(rng.randrange(1000), 1000) for _ in range(n))
        w = matvec(cocycle.ptav.lambda_basis, w)
        fw = float(f(w))
        for lam in cocycle.ptav.generators():
            gap = float(f(add(w, lam))) - fw - float(cocycle.z(lam, w))
            if abs(gap) > 1e-12 * (1 + abs(fw)):
                raise InvalidInput(f"oracle violates automorphy by {gap:.3e}")
    pieces = [supporting_piece(f, p, to_fraction(eps), grad, max_den) for p in pts]
    return PeriodicPL.of(cocycle, pieces)


def tropical_theta(cocycle: Cocycle) -> PeriodicPL:
    """Translate closure of the zero piece: max over l of <Bl, w> - b(l, l)/2."""
    return PeriodicPL.of(cocycle, [((0,) * cocycle.ptav.n, 0)])


# -------------------------------------------------------- periodic MA measure

def _lll_cocycle(z: Cocycle) -> Cocycle:
    """Same lattice, cocycle and form on a basis L U that is LLL-reduced for b.

    U comes from a scaled float Cholesky factor of the Gram matrix; any
    unimodular U is exact, the float only steers how good the reduction is.
    """
    p = z.ptav
    gram = np.array([[float(x) for x in r] for r in p.gram])
    chol = np.linalg.cholesky(gram)  # gram = chol chol^T, rows are generators in a b-orthonormal frame
    scale = 1e6 / float(np.abs(chol).max())
    rows = [[ZZ(int(round(x * scale))) for x in r] for r in chol]
    _, t = DomainMatrix(rows, (p.n, p.n), ZZ).lll_transform()
    u = [[int(t[j, i].element) for j in range(p.n)] for i in range(p.n)]
    if abs(det(u)) != 1:
        return z
    return Cocycle.of(PolarizedTropAV.of(matmul(p.lambda_basis, u),
                                         matmul(p.polarization, u)))


def periodic_ma_measure(f: PeriodicPL, max_layers: int = 10,
                        margin: Fraction | None = None) -> DiscreteMeasure:
    """Atoms n! vol(dual cell) at vertex representatives in the half-open domain.

    The walk runs on a reduced basis, whose fundamental domain is compact even
    when the given one is long and thin; atoms are then moved back. ``margin``
    (in lattice coordinates) sets the first search region [-margin, 1 + margin]^n,
    which grows by 1/2 per side whenever the walk leaves it.
    """
    home = f.cocycle
    n = f.dim
    z = _lll_cocycle(home) if n > 1 else home
    f = PeriodicPL.of(z, f.base_pieces)
    # dual edges grow with the rank; starting wide enough saves a failed pass
    margin = Fraction(1 + (n >= 4), 2) if margin is None else Fraction(margin)
    lo, hi = -margin, 1 + margin
    for _ in range(max_layers):
        region = z.domain_vertices(lo, hi)
        per = math.ceil(hi - lo)
        width = (hi - lo) / per
        ticks = [lo + j * width for j in range(per + 1)]
        grid = {j: z.ptav.lattice_point([ticks[i] for i in j])
                for j in itertools.product(range(per + 1), repeat=n)}
        cells = [[grid[tuple(c + e for c, e in zip(corner, eps))]
                  for eps in itertools.product((0, 1), repeat=n)]
                 for corner in itertools.product(range(per), repeat=n)]
        pieces = f.pieces_on_cells(cells, certify=region)
        linv = z._linv

        def inside(w: Vec, lo=lo, hi=hi) -> bool:
            return all(lo <= x <= hi for x in matvec(linv, w))

        def reduce(w: Vec) -> Vec:
            return z.reduce(w)[0]

        try:
            screen = _FloatScreen(pieces)
            start = _descend(pieces, n, z.reduce((Fraction(0),) * n)[0], inside, screen)
            if start is None:
                raise RegionExceeded
            walk = walk_vertices(pieces, n, reduce(start), reduce, inside, screen)
            if walk.rays:
                raise RegionExceeded
        except RegionExceeded:
            lo, hi = lo - Fraction(1, 2), hi + Fraction(1, 2)
            continue
        nf = math.factorial(n)
        return DiscreteMeasure.of(n, [(home.reduce(w)[0], nf * walk.dual_cells[w].volume())
                                      for w in walk.vertices])
    raise NoConvergence("vertex walk kept leaving the enlarged domain")


# -------------------------------------------------------------- torus solver

class _TorusCells:
    """Cells C_i of f* = max_{i,k} <x, p_i + L k> - c_{i,k}, one per site class."""

    def __init__(self, z: Cocycle, sites: np.ndarray, radius: int = 1):
        self.lf, self.bf, self.pf = z.float_data()
        self.binv = np.linalg.inv(self.bf)
        self.sites = sites
        self.n = sites.shape[1]
        self.d = abs(float(np.linalg.det(self.pf)))
        self.radius = radius
        corners = np.array(list(itertools.product((0.0, 1.0), repeat=self.n)))
        image = corners @ (self.bf @ self.lf).T
        self.center = image.mean(axis=0)
        self.half = 2.0 * float(np.abs(image - self.center).max()) + 1.0

    def _replicas(self, c: np.ndarray):
        ks = np.array(list(_box(self.radius, self.n)), dtype=float)
        lam = ks @ self.lf.T
        pts, offs, owner = [], [], []
        for j, p in enumerate(self.sites):
            pts.append(p + lam)
            offs.append(c[j] + lam @ (self.bf @ p) + 0.5 * np.einsum("ki,ij,kj->k", lam, self.bf, lam))
            owner.append(np.full(len(ks), j))
        return np.vstack(pts), np.concatenate(offs), np.concatenate(owner), len(ks)

    def _cell(self, i: int, pts, offs, owner, nk) -> CellGeom:
        self_idx = i * nk + nk // 2  # k = 0 sits in the middle of the box enumeration
        mask = np.ones(len(pts), dtype=bool)
        mask[self_idx] = False
        a = pts[mask] - pts[self_idx]
        b = offs[mask] - offs[self_idx]
        idx = np.flatnonzero(mask)
        lo, hi = self.center - self.half, self.center + self.half
        if self.n == 1:
            geom = clip_interval(lo[0], hi[0], a[:, 0], b)
        elif self.n == 2:
            poly = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
            geom = clip_polygon(poly, [-1, -2, -3, -4], a, b)
        else:
            eye = np.eye(self.n)
            aa = np.vstack([a, eye, -eye])
            bb = np.r_[b, hi, -lo]
            labels = list(range(len(b))) + [-1 - k for k in range(2 * self.n)]
            geom = clip_general(aa, bb, labels)
        geom.facets = {(int(idx[k]) if k >= 0 else k): w for k, w in geom.facets.items()}
        return geom

    def cells(self, c: np.ndarray) -> tuple[list[CellGeom], np.ndarray, np.ndarray]:
        for _ in range(8):
            pts, offs, owner, nk = self._replicas(c)
            cells = [self._cell(i, pts, offs, owner, nk) for i in range(len(self.sites))]
            total = sum(g.volume for g in cells)
            boxed = any(k < 0 for g in cells for k in g.facets)
            if boxed:
                self.half *= 2
            if abs(total - self.d) <= 1e-11 * self.d and not boxed:
                return cells, pts, owner
            if not boxed:
                self.radius += 1
        raise NoConvergence("could not resolve periodic Laguerre cells")

    def evaluator(self, masses: np.ndarray):
        nf = math.factorial(self.n)

        def evaluate(c: np.ndarray) -> _Eval:
            cells, pts, owner = self.cells(c)
            vols = np.array([g.volume for g in cells]) * nf
            val = -float(masses @ c)
            h = np.zeros((len(c), len(c)))
            for i, g in enumerate(cells):
                p = self.sites[i]
                if g.volume > 0:
                    val -= nf * (float(g.moment1 @ p) - c[i] * g.volume
                                 - 0.5 * float(np.sum(self.binv * g.moment2)))
                for t, area in g.facets.items():
                    j = int(owner[t])
                    if j == i:
                        continue
                    w = nf * area / np.linalg.norm(pts[t] - p)
                    h[i, j] += w
                    h[i, i] -= w
            return _Eval(val, vols - masses, (h + h.T) / 2, vols, cells)

        return evaluate


@dataclass
class TorusSolution:
    f: PeriodicPL
    offsets: np.ndarray  # c_i = f(p_i)
    sites: np.ndarray
    residuals: np.ndarray
    iterations: int
    grid: np.ndarray
    phi_values: np.ndarray  # (f - Q) on the grid
    uniqueness_gap: float | None = None
    history: list[float] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max())


def _grid(z: Cocycle, per_axis: int) -> np.ndarray:
    lf = z.float_data()[0]
    ticks = [(k + 0.5) / per_axis for k in range(per_axis)]
    return np.array(list(itertools.product(ticks, repeat=z.ptav.n))) @ lf.T


def _rational(x: float, den: int) -> Fraction:
    return Fraction(float(x)).limit_denominator(den)


def _solve_offsets(z: Cocycle, sites: np.ndarray, masses: np.ndarray, anchor: int, tol: float,
                   max_iter: int, seed: int | None, history: list[float]):
    _, bf, _ = z.float_data()
    tc = _TorusCells(z, sites)
    q = 0.5 * np.einsum("ki,ij,kj->k", sites, bf, sites)
    c0 = q.copy()
    if seed is not None and len(sites) > 1:
        rng = np.random.default_rng(seed)
        lf = z.float_data()[0]
        sep2 = np.inf
        for k in _box(1, z.ptav.n):
            lam = lf @ np.array(k, dtype=float)
            diff = sites[:, None, :] - sites[None, :, :] + lam
            dist = np.einsum("abi,ij,abj->ab", diff, bf, diff)
            if not any(k):
                dist = dist + np.diag(np.full(len(sites), np.inf))
            sep2 = min(sep2, float(dist.min()))
        c0 = c0 + rng.uniform(-sep2 / 8, sep2 / 8, len(sites))
    c0 -= c0[anchor] - q[anchor]
    c, ev, iters = damped_newton(tc.evaluator(masses), c0, masses, anchor, tol, max_iter, history)
    return c, ev, iters, tc


def solve_torus_ma(p: PolarizedTropAV, mu: DiscreteMeasure, tol: float = 1e-9,
                   max_iter: int = 200, seed: int | None = 0, check_uniqueness: bool = True,
                   grid_per_axis: int = 8) -> TorusSolution:
    """Periodic f = phi + Q with per-period MA(f) = mu, normalized by f(0) = 0."""
    z = Cocycle.of(p)
    n = p.n
    if mu.dim != n:
        raise InvalidInput("measure dimension mismatch")
    if not mu.atoms or any(m <= 0 for m in mu.masses):
        raise InvalidInput("masses must be strictly positive")
    expected = math.factorial(n) * p.d
    if abs(mu.total - expected) > Fraction(1, 10**12) * expected:
        raise InvalidInput(f"total mass {float(mu.total)} differs from n!d = {expected}")
    reduced = DiscreteMeasure.of(n, [(z.reduce(q)[0], m) for q, m in mu.atoms])
    sites = np.array([[float(x) for x in q] for q in reduced.points])
    masses = np.array([float(m) for m in reduced.masses])
    masses *= expected / masses.sum()
    anchor = int(np.argmax(masses))
    history: list[float] = []
    c, ev, iters, tc = _solve_offsets(z, sites, masses, anchor, tol, max_iter, seed, history)

    # f = sup over cell vertices x of <x, w> - f*(x)
    pts, offs, _, _ = tc._replicas(c)
    verts = {}
    for g in ev.cells:
        for x in g.vertices:
            verts.setdefault(tuple(np.round(x, 9)), x)
    pieces = []
    for x in verts.values():
        star = float((pts @ x - offs).max())
        pieces.append((tuple(_rational(t, 10**6) for t in x), _rational(-star, 10**12)))
    f = PeriodicPL.of(z, pieces)
    f = f.shifted(-f((Fraction(0),) * n))
    grid = _grid(z, grid_per_axis)
    qf = 0.5 * np.einsum("ki,ij,kj->k", grid, tc.bf, grid)
    phi_vals = f.evaluate_float(grid) - qf
    gap = None
    if check_uniqueness:
        c2, *_ = _solve_offsets(z, sites, masses, anchor, tol, max_iter,
                                (seed or 0) + 7919, [])
        diff = (c2 - c2[anchor]) - (c - c[anchor])
        gap = float(np.abs(diff - diff.mean()).max())
    offsets = np.array([float(f(tuple(Fraction(t) for t in s))) for s in sites])
    return TorusSolution(f, offsets, sites, np.abs(ev.grad), iters, grid, phi_vals, gap, history)
