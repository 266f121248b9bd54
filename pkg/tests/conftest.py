from fractions import Fraction

from hypothesis import HealthCheck, settings, strategies as st

from tropma.convex import MaxAffine

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def rationals(lo: int = -4, hi: int = 4, den: int = 4):
    return st.builds(Fraction, st.integers(lo * den, hi * den), st.just(den))


@st.composite
def max_affines(draw, n: int | None = None, max_pieces: int = 6, size: int = 3):
    n = draw(st.integers(1, 3)) if n is None else n
    k = draw(st.integers(1, max_pieces))
    slopes = draw(st.lists(st.tuples(*[st.integers(-size, size)] * n), min_size=k, max_size=k))
    offsets = draw(st.lists(rationals(-3, 3, 2), min_size=k, max_size=k))
    return MaxAffine.of(list(zip(slopes, offsets)), n)


def points(n: int, lo: int = -5, hi: int = 5, den: int = 3):
    return st.tuples(*[rationals(lo, hi, den)] * n)
