from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tropma._exact import InvalidInput, add, dot, matvec
from tropma.abelian import (Cocycle, PeriodicPL, PolarizedTropAV, canonical_volume,
                            check_automorphy, periodic_approximation, periodic_ma_measure,
                            random_ptav, solve_torus_ma, tropical_theta, validate_ptav)
from tropma.monge_ampere import DiscreteMeasure, match_atoms

ID1 = PolarizedTropAV.of([[1]], [[1]])
TIMES2 = PolarizedTropAV.of([[1]], [[2]])
TIMES3 = PolarizedTropAV.of([[1]], [[3]])
ID2 = PolarizedTropAV.of([[1, 0], [0, 1]], [[1, 0], [0, 1]])
DIAG12 = PolarizedTropAV.of([[1, 0], [0, 1]], [[1, 0], [0, 2]])
HALF = F(1, 2)


def random_periodic(seed: int, n: int, d: int, k: int = 3) -> PeriodicPL:
    p = random_ptav(n, d, seed=seed, size=2)
    z = Cocycle.of(p)
    rng = np.random.default_rng(seed)
    pieces = [(tuple(F(int(x), 3) for x in rng.integers(-6, 7, n)), F(int(rng.integers(-9, 10)), 4))
              for _ in range(k)]
    return PeriodicPL.of(z, pieces)


def fd_points(z: Cocycle, count: int, seed: int):
    rng = np.random.default_rng(seed)
    n = z.ptav.n
    return [matvec(z.ptav.lambda_basis, [F(int(x), 97) for x in rng.integers(-150, 250, n)])
            for _ in range(count)]


# ------------------------------------------------------------------ validation

def test_validate_examples():
    r = validate_ptav(ID1)
    assert (r.valid, r.d, r.degree) == (True, 1, 1)
    r = validate_ptav(TIMES3)
    assert (r.valid, r.d, r.degree) == (True, 3, 9)
    bad = PolarizedTropAV.of([[1, 0], [0, 1]], [[1, 1], [0, 1]])
    r = validate_ptav(bad)
    assert not r.valid and r.failed_axiom == 5
    assert validate_ptav(PolarizedTropAV.of([[1, 1], [1, 1]], [[1, 0], [0, 1]])).failed_axiom == 3
    assert validate_ptav(PolarizedTropAV.of([[1]], [[-1]])).failed_axiom == 5
    with pytest.raises(InvalidInput):
        PolarizedTropAV.of([[1]], [[F(1, 2)]])


def test_canonical_volume_examples():
    assert canonical_volume(ID1) == 1
    assert canonical_volume(TIMES3) == 3
    assert canonical_volume(DIAG12) == 4


@given(st.integers(1, 2), st.integers(1, 3), st.integers(0, 10**6))
@settings(max_examples=20)
def test_random_ptav_valid(n, d, seed):
    r = validate_ptav(random_ptav(n, d, seed=seed))
    assert r.valid and r.d == d


# ------------------------------------------------------------------ cocycle

@given(st.integers(0, 10**6), st.data())
@settings(max_examples=25)
def test_cocycle_identity(seed, data):
    z = Cocycle.of(random_ptav(2, data.draw(st.integers(1, 3)), seed=seed))
    w = tuple(F(data.draw(st.integers(-50, 50)), 7) for _ in range(2))
    k = [data.draw(st.integers(-3, 3)) for _ in range(2)]
    lam = z.ptav.lattice_point(k)
    zero = (F(0), F(0))
    assert z.z(lam, w) == z.z(lam, zero) + z.b(w, lam)
    assert z.z(lam, w) == z.q(add(w, lam)) - z.q(w)


@given(st.integers(0, 10**6), st.data())
@settings(max_examples=25)
def test_translate_consistency(seed, data):
    z = Cocycle.of(random_ptav(2, 2, seed=seed))
    piece = ((F(data.draw(st.integers(-9, 9)), 4), F(1, 3)), F(data.draw(st.integers(-9, 9)), 5))
    k = (data.draw(st.integers(-3, 3)), data.draw(st.integers(-3, 3)))
    lam = z.ptav.lattice_point(k)
    moved = z.translate_piece(piece, k)
    for w in fd_points(z, 5, seed):
        h = dot(piece[0], w) + piece[1]
        assert dot(moved[0], add(w, lam)) + moved[1] - h == z.z(lam, w)


# ------------------------------------------------------------------ periodic PL

def test_theta_gap_and_measure():
    z = Cocycle.of(ID1)
    th = tropical_theta(z)
    assert z.q((HALF,)) - th((HALF,)) == F(1, 8)
    for k in range(-3, 4):
        assert th((F(k),)) == z.q((F(k),))
    assert periodic_ma_measure(th).atoms == (((HALF,), F(1)),)


def test_theta_times_two():
    th = tropical_theta(Cocycle.of(TIMES2))
    mu = periodic_ma_measure(th)
    # the single base piece yields one vertex per period whose dual cell has length 2
    assert mu.total == 2 == canonical_volume(TIMES2)


def test_single_piece_is_translated_theta():
    z = Cocycle.of(ID1)
    f = PeriodicPL.of(z, [((HALF,), F(1, 3))])
    th = tropical_theta(z)
    # an affine base piece closes up to a shifted theta: same measure up to translation
    a, b = periodic_ma_measure(f), periodic_ma_measure(th)
    assert a.total == b.total == 1 and len(a.atoms) == 1


@pytest.mark.parametrize("seed,n,d", [(0, 1, 1), (1, 1, 3), (2, 2, 1), (3, 2, 2), (4, 2, 3)])
def test_automorphy_exact(seed, n, d):
    f = random_periodic(seed, n, d)
    pts = fd_points(f.cocycle, 100, seed)
    assert check_automorphy(f, pts[:20], direct=True)
    assert check_automorphy(f, pts, direct=False)
    for w in pts[:20]:
        assert f(w) == f.evaluate_direct(w)


@pytest.mark.parametrize("seed,n,d", [(10, 1, 1), (11, 1, 2), (12, 2, 1), (13, 2, 2), (14, 2, 3)])
def test_periodic_mass_equals_canonical_volume(seed, n, d):
    f = random_periodic(seed, n, d)
    assert periodic_ma_measure(f).total == canonical_volume(f.cocycle.ptav)


def test_diag12_theta_mass():
    assert periodic_ma_measure(tropical_theta(Cocycle.of(DIAG12))).total == 4


# ------------------------------------------------------------ approximation

def test_approximation_theta_example():
    z = Cocycle.of(ID1)
    h = periodic_approximation(z.q, z, [(F(0),)], 0, grad=lambda w: [w[0]])
    assert h.base_pieces == tropical_theta(z).base_pieces
    assert z.q((HALF,)) - h((HALF,)) == F(1, 8)


def periodic_grad(f: PeriodicPL):
    def grad(w):
        ps = f.pieces_on([tuple(w)])
        vals = [dot(m, w) + c for m, c in ps]
        return list(ps[vals.index(max(vals))][0])
    return grad


def test_approximation_recovers_periodic_pl():
    z = Cocycle.of(TIMES2)
    f = PeriodicPL.of(z, [((F(0),), F(0)), ((F(1),), F(-1, 4))])
    # one interior point of each base cell per period
    verts = sorted(float(p[0]) for p in periodic_ma_measure(f).points)
    grid = [(F(x).limit_denominator(1000),) for x in np.array(verts) + 0.05]
    h = periodic_approximation(f, z, grid, 0, grad=periodic_grad(f))
    assert h.base_pieces == f.base_pieces


def test_approximation_sandwich():
    z = Cocycle.of(DIAG12)
    eps = F(1, 10)
    grid = [matvec(z.ptav.lambda_basis, (F(a, 3), F(b, 3))) for a in range(3) for b in range(3)]
    h = periodic_approximation(z.q, z, grid, eps,
                               grad=lambda w: list(matvec(z.b_matrix, w)))
    assert check_automorphy(h, fd_points(z, 10, 1))
    rng = np.random.default_rng(0)
    lf, bf, _ = z.float_data()
    pts = rng.uniform(0, 1, size=(10_000, 2)) @ lf.T
    hv = h.evaluate_float(pts)
    qv = 0.5 * np.einsum("ki,ij,kj->k", pts, bf, pts)
    assert (hv <= qv + 1e-12).all()
    for p in grid:
        assert z.q(p) - eps <= h(p) <= z.q(p)


def test_approximation_rejects_non_automorphic():
    z = Cocycle.of(ID1)
    with pytest.raises(InvalidInput):
        periodic_approximation(lambda w: float(w[0]) ** 2, z, [(F(0),)], F(1, 10))


# ------------------------------------------------------------------ solver

def test_torus_theta_example():
    sol = solve_torus_ma(ID1, DiscreteMeasure.of(1, [((HALF,), 1)]))
    assert abs(float(sol.f.phi((HALF,)) - sol.f.phi((F(0),))) + 0.125) <= 1e-10
    assert sol.f.base_pieces == tropical_theta(Cocycle.of(ID1)).base_pieces


def test_torus_delta_zero_is_translated_theta():
    sol = solve_torus_ma(ID1, DiscreteMeasure.of(1, [((F(0),), 1)]))
    z = Cocycle.of(ID1)
    th = tropical_theta(z)
    # phi_sol(x) = phi_theta(x - 1/2) + const
    consts = {sol.f.phi((x,)) - th.phi((x - HALF,)) for x in (F(k, 8) for k in range(-8, 9))}
    assert len(consts) == 1
    assert periodic_ma_measure(sol.f).atoms == (((F(0),), F(1)),)


def test_torus_product_example():
    sol = solve_torus_ma(ID2, DiscreteMeasure.of(2, [((HALF, HALF), 2)]))
    assert sol.residuals.max() <= 1e-9 * 2
    th = tropical_theta(Cocycle.of(ID1))
    for x, y in [(F(1, 3), F(3, 4)), (HALF, HALF), (F(-1, 5), F(7, 3))]:
        expect = th.phi((x,)) + th.phi((y,))
        assert sol.f.phi((x, y)) - sol.f.phi((F(0), F(0))) == expect - 2 * th.phi((F(0),))


def test_torus_random_instance():
    p = random_ptav(2, 2, seed=3)
    rng = np.random.default_rng(0)
    pts = [tuple(F(int(x), 13) for x in rng.integers(0, 13, 2)) for _ in range(8)]
    pts = sorted(set(pts))
    mu = DiscreteMeasure.of(2, [(matvec(p.lambda_basis, q), F(2 * p.d, len(pts))) for q in pts])
    sol = solve_torus_ma(p, mu)
    assert sol.uniqueness_gap is not None and sol.uniqueness_gap <= 1e-8
    assert sol.residuals.max() <= 1e-9 * float(min(mu.masses))
    assert check_automorphy(sol.f, fd_points(sol.f.cocycle, 10, 2), direct=False)
    ma = periodic_ma_measure(sol.f)
    assert ma.total == 4
    m = match_atoms(ma, mu, 1e-6, p.lambda_basis)
    assert m.max_relative_error(mu) <= 1e-6 and m.debris_mass <= 1e-9


def test_torus_two_seeds_agree_on_grid():
    mu = DiscreteMeasure.of(1, [((F(1, 5),), F(1, 3)), ((F(3, 5),), F(2, 3))])
    a = solve_torus_ma(TIMES2, mu.scaled(2), seed=1)
    b = solve_torus_ma(TIMES2, mu.scaled(2), seed=99)
    diff = a.phi_values - b.phi_values
    assert np.abs(diff - diff.mean()).max() <= 1e-8


def test_torus_mass_mismatch():
    with pytest.raises(InvalidInput):
        solve_torus_ma(ID1, DiscreteMeasure.of(1, [((HALF,), 2)]))
