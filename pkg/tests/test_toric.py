from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from conftest import max_affines, rationals
from tropma._exact import InvalidInput
from tropma.convex import AffineMap, MaxAffine, canonical_form
from tropma.toric import (ExtendedPoint, Fan, GreenData, boundary_extension, canonical_green,
                          evaluate_extended, is_psh, is_theta_psh, pullback, recession_function,
                          star_fan, validate_fan)

P1 = Fan.of(1, [[(1,)], [(-1,)]])
HALF_LINE = Fan.of(1, [[(1,)]])
P2 = Fan.of(2, [[(1, 0), (0, 1)], [(0, 1), (-1, -1)], [(-1, -1), (1, 0)]])
P1xP1 = Fan.of(2, [[(a, 0), (0, b)] for a in (1, -1) for b in (1, -1)])
HIRZEBRUCH2 = Fan.of(2, [[(1, 0), (0, 1)], [(0, 1), (-1, 2)], [(-1, 2), (0, -1)],
                         [(0, -1), (1, 0)]])
COMPLETE_FANS = [P1, P2, P1xP1, HIRZEBRUCH2]


def ma(*pieces):
    return MaxAffine.of(pieces)


# --------------------------------------------------------------------- fans

def test_validate_examples():
    r = validate_fan(P1)
    assert (r.valid, r.complete, r.smooth) == (True, True, True)
    r = validate_fan(HALF_LINE)
    assert (r.valid, r.complete, r.smooth) == (True, False, True)
    r = validate_fan(Fan.of(2, [[(1, 0), (1, 2)]]))
    assert r.valid and not r.smooth and not r.complete


def test_validate_complete_fans():
    for fan in COMPLETE_FANS:
        r = validate_fan(fan)
        assert r.valid and r.complete and r.smooth


def test_validate_overlap_witness():
    fan = Fan.of(2, [[(1, 0), (0, 1)], [(1, 1), (-1, 1)]])
    r = validate_fan(fan)
    assert not r.valid and r.witness is not None


def test_faces_are_derived():
    assert {c.rays for c in P2.cones} >= {(), ((1, 0),), ((0, 1),), ((-1, -1),)}


# ---------------------------------------------------------------- star fans

def test_star_fan_examples():
    s = star_fan(ma(((0,), 0), ((1,), 0)), (0,))
    assert {c.rays for c in s.maximal} == {((-1,),), ((1,),)}
    square = ma(((0, 0), 0), ((1, 0), 0), ((0, 1), 0), ((1, 1), 0))
    quads = {c.rays for c in star_fan(square, (0, 0)).maximal}
    assert quads == {c.rays for c in P1xP1.maximal}
    tri = ma(((0, 0), 0), ((1, 0), 0), ((0, 1), 0), ((1, 1), -1))
    cones = {c.rays for c in star_fan(tri, (0, 0)).maximal}
    assert cones == {((-1, 0), (0, -1)), ((0, -1), (1, 1)), ((-1, 0), (1, 1))}


def test_star_fan_rejects_non_vertex():
    with pytest.raises(InvalidInput):
        star_fan(ma(((0, 0), 0), ((1, 0), 0)), (0, 0))


def test_recession_examples():
    g = recession_function(ma(((0,), 0), ((1,), 0)), (0,))
    assert g((F(3),)) == 3 and g((F(-2),)) == 0
    g2 = recession_function(ma(((0,), 0), ((1,), 0)).add_affine((F(1, 2),), 7), (0,))
    assert g2((F(1),)) - g2((F(-1),)) == g((F(1),)) - g((F(-1),)) + 1
    tri = ma(((0, 0), 0), ((1, 0), 0), ((0, 1), 0), ((1, 1), -1))
    r = recession_function(tri, (1, 1))
    assert {m for _, m in r.slopes} == {(F(1), F(0)), (F(0), F(1)), (F(1), F(1))}
    assert r.is_convex()


# ------------------------------------------------------------ boundary extension

def test_boundary_extension_examples():
    ray = ((1,),)
    e = boundary_extension(ma(((0,), 0), ((-1,), 0)), HALF_LINE)[ray]
    assert e.status == "finite" and e.value == 0
    assert boundary_extension(ma(((1,), 0)), HALF_LINE)[ray].status == "fails"
    assert boundary_extension(ma(((-1,), 0)), HALF_LINE)[ray].status == "minus_infinity"


def test_extended_point_evaluation():
    f = ma(((0, 0), 1), ((-1, 1), 0), ((0, 1), -2))
    fan = Fan.of(2, [[(1, 0)]])
    idx = fan.index([(1, 0)])
    # toward +e1 the pieces vanishing on the ray are (0,0) and (0,1): value max(1, v - 2)
    assert evaluate_extended(f, fan, ExtendedPoint(idx, (F(5),))) == 3
    assert evaluate_extended(f, fan, ExtendedPoint(idx, (F(0),))) == 1
    with pytest.raises(InvalidInput):
        evaluate_extended(f, fan, ExtendedPoint(idx, (F(0), F(1))))


@given(max_affines(max_pieces=4), rationals())
def test_extension_constant_invariance(f, c):
    fan = P1 if f.dim == 1 else P2 if f.dim == 2 else Fan.of(3, [[(1, 0, 0), (0, 1, 0)]])
    a = boundary_extension(f, fan)
    b = boundary_extension(f.shifted(c), fan)
    for key in a:
        assert a[key].status == b[key].status


@given(max_affines(n=2, max_pieces=4), st.tuples(st.integers(-2, 2), st.integers(-2, 2)))
def test_extension_slope_shift(f, m):
    f = canonical_form(f)
    g = f.add_affine(m)
    for key, ext in boundary_extension(g, P2).items():
        predicted = all(sum((a + b) * r for a, b, r in zip(s, m, ray)) <= 0
                        for s, _ in f.pieces for ray in key)
        assert (ext.status != "fails") == predicted


# --------------------------------------------------------------------- psh

def test_is_psh_examples():
    assert not is_psh(ma(((0,), 0), ((-1,), 0)), P1)
    assert is_psh(ma(((0,), F(7, 3))), P1)
    assert is_psh(ma(((0,), 0), ((-1,), 0)), HALF_LINE)


@given(max_affines(max_pieces=5))
def test_maximum_principle(f):
    f = canonical_form(f)
    fans = [fan for fan in COMPLETE_FANS if fan.dim == f.dim]
    if f.dim == 3:
        fans = [Fan.of(3, [[(1, 0, 0), (0, 1, 0), (0, 0, 1)], [(1, 0, 0), (0, 1, 0), (-1, -1, -1)],
                           [(1, 0, 0), (0, 0, 1), (-1, -1, -1)],
                           [(0, 1, 0), (0, 0, 1), (-1, -1, -1)]])]
    for fan in fans:
        nonconstant = len(f.pieces) > 1 or any(f.pieces[0][0])
        assert is_psh(f, fan) == (not nonconstant)


# ---------------------------------------------------------------- theta-psh

def p1_green() -> GreenData:
    # Psi = min(u, 0): slope 1 on the ray +1 cone, 0 on the ray -1 cone
    return canonical_green(P1, {((1,),): (0,), ((-1,),): (1,)})


def test_canonical_green_p1():
    g = p1_green()
    assert g.green == canonical_form(ma(((0,), 0), ((-1,), 0)))
    assert g.check() == (True, "")


def phi_half_secant_plus_g0() -> MaxAffine:
    """h = phi + g0 for the secant of phi_1/2 on the nodes 0, 1, 4, 9, 16."""
    nodes = [(0, F(1)), (1, F(0)), (4, F(-2)), (9, F(-4)), (16, F(-6))]
    pieces = []
    for (a, fa), (b, fb) in zip(nodes, nodes[1:]):
        s = (fb - fa) / (b - a)
        pieces.append(((s,), fa - s * a))
    return ma(*pieces)


def test_theta_psh_examples():
    g = p1_green()
    assert is_theta_psh(g.green, g, P1)  # phi = 0
    h = phi_half_secant_plus_g0()
    assert h((F(-3),)) == 4 and h((F(4),)) == -2
    assert is_theta_psh(h, g, P1)
    # phi = secant of u^2 is convex but h + m_sigma blows up toward +inf
    sq = ma(((-2,), -1), ((0,), 0), ((2,), -1))
    assert not is_theta_psh(sq + g.green, g, P1)


@given(st.integers(0, 3), st.tuples(st.integers(-2, 2), st.integers(-2, 2)))
def test_theta_psh_zero_for_concave_psi(k, ell):
    # Psi = -k max(0, -u1, -u2) + <ell, u> is concave and linear on the cones of P2
    add = lambda v: (v[0] + ell[0], v[1] + ell[1])
    slopes = {((1, 0), (0, 1)): add((0, 0)), ((0, 1), (-1, -1)): add((k, 0)),
              ((-1, -1), (1, 0)): add((0, k))}
    data = canonical_green(P2, slopes)
    assert data.check()[0]
    assert is_theta_psh(data.green, data, P2)


# ---------------------------------------------------------------- pullback

def test_pullback_examples():
    f = ma(((0,), 0), ((1,), 0))
    assert pullback(f, AffineMap.identity(1)) == canonical_form(f)
    assert pullback(f, AffineMap.of([[2]])) == canonical_form(ma(((0,), 0), ((2,), 0)))
    proj = AffineMap.of([[1, 0]])
    g = pullback(f, proj)
    assert g == canonical_form(ma(((0, 0), 0), ((1, 0), 0)))


@given(max_affines(n=2, max_pieces=4),
       st.lists(st.integers(-2, 2), min_size=6, max_size=6),
       st.lists(st.integers(-2, 2), min_size=6, max_size=6))
def test_pullback_composes(f, a, b):
    e1 = AffineMap.of([a[:2], a[2:4]], a[4:])
    e2 = AffineMap.of([b[:2], b[2:4]], b[4:])
    assert pullback(pullback(f, e1), e2) == pullback(f, e1.compose(e2))
