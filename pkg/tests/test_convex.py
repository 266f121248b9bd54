from fractions import Fraction as F
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from conftest import max_affines, points, rationals
from tropma._exact import InvalidInput, dot, sub
from tropma.convex import (AffineMap, MaxAffine, canonical_form, double_transform,
                           induced_decomposition, is_canonical, legendre_transform,
                           rational_pl_approximate, stability_set, subdifferential,
                           support_function)
from tropma.oracles import brute_force_vertices
from tropma.polytope import Polytope, box


def ma(*pieces):
    return MaxAffine.of(pieces)


def brute_redundant(f: MaxAffine, i: int, grid) -> bool:
    """Piece i never strictly beats all others on a fine grid (oracle for 1-D/2-D)."""
    m, c = f.pieces[i]
    for u in grid:
        own = dot(m, u) + c
        if all(own > dot(mj, u) + cj for j, (mj, cj) in enumerate(f.pieces) if j != i):
            return False
    return True


# ---------------------------------------------------------------- canonical form

def test_canonical_duplicate_removed():
    g = canonical_form(ma(((1,), 0), ((1,), 0), ((2,), -1)))
    assert g.pieces == (((F(1),), F(0)), ((F(2),), F(-1)))


def test_canonical_drops_half_slope():
    g = canonical_form(ma(((0,), 0), ((1,), 0), ((F(1, 2),), 0)))
    assert g.pieces == (((F(0),), F(0)), ((F(1),), F(0)))


def test_canonical_single_piece():
    f = ma(((3, -1), F(2, 7)))
    assert canonical_form(f) == f


def test_empty_rejected():
    with pytest.raises(InvalidInput):
        MaxAffine.of([])


def lp_essential(pieces, i: int) -> bool:
    """Float LP oracle: piece i beats every other piece by a margin somewhere."""
    m = np.array([[float(x) for x in s] for s, _ in pieces])
    c = np.array([float(o) for _, o in pieces])
    others = [j for j in range(len(pieces)) if j != i]
    if not others:
        return True
    n = m.shape[1]
    # variables (u, t): maximize t with (m_j - m_i) u + t <= c_i - c_j
    a = np.hstack([m[others] - m[i], np.ones((len(others), 1))])
    b = c[i] - c[others]
    res = linprog(np.r_[np.zeros(n), -1.0], A_ub=a, b_ub=b,
                  bounds=[(-1e4, 1e4)] * n + [(None, 1.0)])
    return res.status == 0 and -res.fun > 1e-9


@given(max_affines(n=2, max_pieces=6))
def test_canonical_matches_redundancy_oracle(f):
    g = canonical_form(f)
    unique = sorted({m: max(c for mm, c in f.pieces if mm == m) for m, _ in f.pieces}.items())
    kept = {p for p in unique if lp_essential(unique, unique.index(p))}
    assert set(g.pieces) == kept
    assert is_canonical(g)
    assert list(g.pieces) == sorted(g.pieces)
    for u in [(F(a, 4), F(b, 3)) for a in range(-20, 21, 7) for b in range(-20, 21, 5)]:
        assert g(u) == f(u)


@given(max_affines(n=1, max_pieces=7))
def test_canonical_1d_against_grid(f):
    g = canonical_form(f)
    grid = [(F(k, 8),) for k in range(-400, 401)]
    for i in range(len(g.pieces)):
        assert not brute_redundant(g, i, [(F(k, 64),) for k in range(-3200, 3201)])
    for u in grid[::13]:
        assert g(u) == f(u)


# ------------------------------------------------------------------ stability set

def test_stability_examples():
    assert stability_set(ma(((0,), 0), ((1,), 0))) == box([0], [1])
    assert stability_set(ma(((0, 0), 0), ((1, 0), 0), ((0, 1), 0), ((1, 1), 0))) == box([0, 0], [1, 1])
    assert stability_set(ma(((0,), 0), ((-1,), 0))) == box([-1], [0])


def test_support_function_examples():
    assert canonical_form(support_function(box([0], [1]))) == canonical_form(ma(((0,), 0), ((1,), 0)))
    sq = support_function(box([0, 0], [1, 1]))
    assert set(sq.pieces) == {((F(a), F(b)), F(0)) for a, b in product((0, 1), repeat=2)}
    pt = Polytope.from_points([(F(1, 2), F(-3))])
    assert support_function(pt).pieces == (((F(1, 2), F(-3)), F(0)),)


def test_support_function_empty():
    with pytest.raises(InvalidInput):
        support_function(Polytope.empty(2))


@given(st.lists(points(2, -3, 3, 2), min_size=1, max_size=7))
def test_support_roundtrip(pts):
    body = Polytope.from_points(pts, 2)
    assert stability_set(support_function(body)) == body


# ------------------------------------------------------------------ Legendre

def test_legendre_examples():
    dom, g = legendre_transform(ma(((0,), 0), ((1,), 0)))
    assert dom == box([0], [1]) and set(c for _, c in g.g.pieces) == {0}
    dom, g = legendre_transform(ma(((1,), 0), ((-1,), 0)))
    assert dom == box([-1], [1]) and all(g(x) == 0 for x in [(-1,), (0,), (1,)])


def test_legendre_against_grid_sup():
    f = ma(((0,), 0), ((F(1, 2),), F(1, 2)), ((1,), 0))
    dom, g = legendre_transform(f)
    assert dom == box([0], [1])
    us = np.linspace(-50, 50, 200001)
    fu = f.evaluate_float(us[:, None])
    for x in [0, 0.25, 0.5, 0.75, 1]:
        assert abs(float(g((F(x),))) - float((x * us - fu).max())) < 1e-9


@given(max_affines(max_pieces=5))
def test_legendre_involution(f):
    g = double_transform(f)
    assert g == canonical_form(f)
    rng = np.random.default_rng(0)
    for u in rng.integers(-50, 50, size=(30, f.dim)):
        uq = tuple(F(int(x), 7) for x in u)
        assert g(uq) == f(uq)


# ----------------------------------------------------------------- subdifferential

def test_subdifferential_examples():
    f = ma(((0,), 0), ((1,), 0))
    assert subdifferential(f, (0,)) == box([0], [1])
    assert subdifferential(f, (3,)) == Polytope.from_points([(1,)])


def appendix_u() -> MaxAffine:
    """-4x-3 outside [-1,1], tangents of x^2 at quarter points inside."""
    pieces = [((-4,), -3), ((4,), -3)]
    pieces += [((2 * a,), -a * a) for a in (F(k, 4) for k in range(-4, 5))]
    return canonical_form(MaxAffine.of(pieces))


def test_subdifferential_appendix_example():
    assert subdifferential(appendix_u(), (1,)) == box([2], [4])


@given(max_affines(max_pieces=5), st.data())
def test_subdifferential_monotone(f, data):
    u = data.draw(points(f.dim))
    w = data.draw(points(f.dim))
    for xu in subdifferential(f, u).vertices:
        for xw in subdifferential(f, w).vertices:
            assert dot(sub(xu, xw), sub(u, w)) >= 0


# ------------------------------------------------------------ decomposition

def test_decomposition_examples():
    d = induced_decomposition(ma(((0,), 0), ((1,), 0)))
    assert d.vertices == ((F(0),),) and len(d.cells) == 2
    d = induced_decomposition(ma(((0, 0), 0), ((1, 0), 0), ((0, 1), 0), ((1, 1), -1)))
    assert set(d.vertices) == {(F(0), F(0)), (F(1), F(1))}
    d = induced_decomposition(ma(((2, 1), 5)))
    assert d.vertices == () and len(d.cells) == 1


def brute_vertices(f: MaxAffine):
    return {tuple(np.round(v, 9)) for v in brute_force_vertices(canonical_form(f))}


@given(max_affines(n=2, max_pieces=6))
def test_decomposition_vertices_match_bruteforce(f):
    d = induced_decomposition(f)
    assert {tuple(np.round([float(x) for x in v], 9)) for v in d.vertices} == brute_vertices(f)


@given(max_affines(max_pieces=5), st.data())
def test_affine_addition(f, data):
    x0 = data.draw(points(f.dim, -2, 2, 2))
    c = data.draw(rationals())
    g = f.add_affine(x0, c)
    assert stability_set(g) == stability_set(f).translate(x0)
    assert induced_decomposition(g).vertices == induced_decomposition(f).vertices


# ------------------------------------------------------------ rational approximation

def test_rational_pl_quadratic():
    h = rational_pl_approximate(lambda u: u[0] * u[0] / 2, [(-1,), (0,), (1,)], 0,
                                grad=lambda u: [u[0]])
    assert h.pieces == (((F(-1),), F(-1, 2)), ((F(0),), F(0)), ((F(1),), F(-1, 2)))


def test_rational_pl_recovers_maxaffine():
    f = ma(((0, 0), 0), ((1, 0), 0), ((0, 1), 0), ((1, 1), -1))
    grid = [(F(-1), F(-1)), (F(2), F(-1)), (F(-1), F(2)), (F(2), F(2))]
    h = rational_pl_approximate(f, grid, 0, grad=lambda u: f.gradient(u))
    assert h == canonical_form(f)


def test_rational_pl_support_plus_constant():
    body = box([-1, 0], [1, 2])
    f = support_function(body).shifted(3)
    eps = F(1, 100)
    grid = [(F(a), F(b)) for a in (-2, 1, 3) for b in (-1, 2)]
    h = rational_pl_approximate(f, grid, eps, grad=lambda u: f.gradient(u))
    rng = np.random.default_rng(1)
    for u in rng.normal(size=(200, 2)) * 5:
        uq = tuple(F(x).limit_denominator(1000) for x in u)
        assert h(uq) <= f(uq)
    for p in grid:
        assert f(p) - eps <= h(p) <= f(p)


def test_rational_pl_sampled_bounds():
    def g(u):
        return (u[0] ** 2 + 2 * u[1] ** 2) / 3

    def grad(u):
        return [2 * u[0] / 3, 4 * u[1] / 3]

    eps = F(1, 50)
    grid = [(F(a, 2), F(b, 2)) for a in range(-4, 5) for b in range(-4, 5)]
    h = rational_pl_approximate(g, grid, eps, grad=grad)
    rng = np.random.default_rng(2)
    samples = rng.uniform(-3, 3, size=(10_000, 2))
    assert (h.evaluate_float(samples) <= (samples[:, 0] ** 2 + 2 * samples[:, 1] ** 2) / 3 + 1e-12).all()
    for p in grid:
        assert g(p) - eps <= h(p) <= g(p)


def test_rational_pl_rejects_nonfinite():
    with pytest.raises(InvalidInput):
        rational_pl_approximate(lambda u: float("inf"), [(0,)], F(1, 10), grad=lambda u: [0.0])


# ------------------------------------------------------------------ affine maps

def test_affine_map_composition():
    e1 = AffineMap.of([[1, 2], [0, 1]], [1, -1])
    e2 = AffineMap.of([[F(1, 2), 0], [3, 1]], [0, 2])
    e3 = AffineMap.of([[2, 0], [1, 1]])
    u = (F(3, 5), F(-2))
    assert e1.compose(e2).compose(e3)(u) == e1.compose(e2.compose(e3))(u) == e1(e2(e3(u)))
    ident = AffineMap.identity(2)
    assert ident.compose(e1) == e1 == e1.compose(ident)
