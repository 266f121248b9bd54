"""Exact rational linear algebra and a small dense simplex solver.

Everything here works on ``fractions.Fraction`` and never rounds.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence

Vec = tuple[Fraction, ...]


class InvalidInput(ValueError):
    """Input violates a documented precondition."""


class NoConvergence(RuntimeError):
    """Iterative solver stopped before meeting its tolerance."""

    def __init__(self, message: str, best=None, residuals=None):
        super().__init__(message)
        self.best = best
        self.residuals = residuals


def to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise InvalidInput("boolean is not a rational number")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidInput(f"bad rational literal {x!r}") from exc
    if isinstance(x, float):
        if x != x or x in (float("inf"), float("-inf")):
            raise InvalidInput("non-finite value")
        return Fraction(x)
    try:
        return Fraction(x)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"cannot convert {x!r} to a rational") from exc


def vec(xs: Iterable) -> Vec:
    return tuple(to_fraction(x) for x in xs)


def dot(a: Sequence, b: Sequence) -> Fraction:
    s = Fraction(0)
    for x, y in zip(a, b):
        if x and y:
            s += x * y
    return s


def sub(a: Sequence, b: Sequence) -> Vec:
    return tuple(x - y for x, y in zip(a, b))


def add(a: Sequence, b: Sequence) -> Vec:
    return tuple(x + y for x, y in zip(a, b))


def scale(s, a: Sequence) -> Vec:
    return tuple(s * x for x in a)


def matvec(m: Sequence[Sequence], v: Sequence) -> Vec:
    return tuple(dot(row, v) for row in m)


def transpose(m: Sequence[Sequence]) -> list[list[Fraction]]:
    return [list(col) for col in zip(*m)]


def matmul(a: Sequence[Sequence], b: Sequence[Sequence]) -> list[list[Fraction]]:
    bt = transpose(b)
    return [[dot(row, col) for col in bt] for row in a]


def rref(rows: Sequence[Sequence]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form and pivot columns."""
    m = [list(map(to_fraction, r)) for r in rows]
    if not m:
        return m, []
    ncols = len(m[0])
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m, pivots


def rank(rows: Sequence[Sequence]) -> int:
    if not rows:
        return 0
    return len(rref(rows)[1])


def nullspace(rows: Sequence[Sequence], ncols: int) -> list[Vec]:
    """Basis of {x : rows @ x = 0}."""
    if not rows:
        return [tuple(Fraction(int(i == j)) for j in range(ncols)) for i in range(ncols)]
    m, pivots = rref(rows)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fcol in free:
        x = [Fraction(0)] * ncols
        x[fcol] = Fraction(1)
        for i, pc in enumerate(pivots):
            x[pc] = -m[i][fcol]
        basis.append(tuple(x))
    return basis


def det(m: Sequence[Sequence]) -> Fraction:
    a = [list(map(to_fraction, r)) for r in m]
    n = len(a)
    if n == 0:
        return Fraction(1)
    d = Fraction(1)
    for c in range(n):
        p = next((i for i in range(c, n) if a[i][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            a[c], a[p] = a[p], a[c]
            d = -d
        d *= a[c][c]
        inv = 1 / a[c][c]
        for i in range(c + 1, n):
            if a[i][c] != 0:
                f = a[i][c] * inv
                a[i] = [x - f * y for x, y in zip(a[i], a[c])]
    return d


def solve(m: Sequence[Sequence], b: Sequence) -> Vec | None:
    """Unique solution of m x = b for square m, or None if singular."""
    n = len(m)
    aug = [list(map(to_fraction, row)) + [to_fraction(bi)] for row, bi in zip(m, b)]
    red, pivots = rref(aug)
    if pivots != list(range(n)):
        return None
    return tuple(red[i][n] for i in range(n))


def inverse(m: Sequence[Sequence]) -> list[list[Fraction]]:
    n = len(m)
    aug = [list(map(to_fraction, row)) + [Fraction(int(i == j)) for j in range(n)]
           for i, row in enumerate(m)]
    red, pivots = rref(aug)
    if pivots[:n] != list(range(n)):
        raise InvalidInput("matrix is singular")
    return [row[n:] for row in red]


def primitive(v: Sequence) -> tuple[int, ...]:
    """Scale a nonzero rational vector to a primitive integer vector."""
    fr = [to_fraction(x) for x in v]
    den = 1
    for x in fr:
        den = den * x.denominator // gcd(den, x.denominator)
    ints = [int(x * den) for x in fr]
    g = 0
    for x in ints:
        g = gcd(g, abs(x))
    if g == 0:
        raise InvalidInput("zero vector has no primitive representative")
    return tuple(x // g for x in ints)


def normalize_hyperplane(a: Sequence, b) -> tuple[Vec, Fraction]:
    """Scale (a, b) so the first nonzero entry of a has absolute value one."""
    lead = next(abs(x) for x in a if x != 0)
    return tuple(x / lead for x in a), to_fraction(b) / lead


# --- linear programming -------------------------------------------------------

def linprog(c: Sequence, a_ub: Sequence[Sequence] = (), b_ub: Sequence = (),
            a_eq: Sequence[Sequence] = (), b_eq: Sequence = ()):
    """Maximize c.x over free x subject to a_ub x <= b_ub and a_eq x = b_eq.

    Returns (status, x, value) with status in {"optimal", "infeasible",
    "unbounded"}. Dense two-phase tableau simplex with Bland's rule.
    """
    n = len(c)
    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    kinds: list[str] = []
    for a, b in zip(a_ub, b_ub):
        rows.append([to_fraction(x) for x in a])
        rhs.append(to_fraction(b))
        kinds.append("ub")
    for a, b in zip(a_eq, b_eq):
        rows.append([to_fraction(x) for x in a])
        rhs.append(to_fraction(b))
        kinds.append("eq")
    m = len(rows)
    n_ub = kinds.count("ub")
    # columns: x+ (n), x- (n), slacks (n_ub), artificials (m)
    nx = 2 * n
    ncol = nx + n_ub + m
    tab: list[list[Fraction]] = []
    basis: list[int] = []
    slack_idx = 0
    zero = Fraction(0)
    for i in range(m):
        row = [zero] * (ncol + 1)
        a, b = rows[i], rhs[i]
        sign = -1 if b < 0 else 1
        for j in range(n):
            row[j] = sign * a[j]
            row[n + j] = -sign * a[j]
        if kinds[i] == "ub":
            row[nx + slack_idx] = Fraction(sign)
            s_col = nx + slack_idx
            slack_idx += 1
        else:
            s_col = None
        row[ncol] = sign * b
        if s_col is not None and sign == 1:
            basis.append(s_col)
        else:
            row[nx + n_ub + i] = Fraction(1)
            basis.append(nx + n_ub + i)
        tab.append(row)

    def pivot(r: int, col: int) -> None:
        pr = tab[r]
        inv = 1 / pr[col]
        if inv != 1:
            tab[r] = pr = [x * inv for x in pr]
        for i in range(len(tab)):
            if i != r:
                f = tab[i][col]
                if f != 0:
                    ri = tab[i]
                    tab[i] = [x - f * y if y else x for x, y in zip(ri, pr)]
        basis[r] = col

    def run(obj: list[Fraction], allowed: int) -> str:
        # obj: coefficients to maximize over columns [0, allowed)
        while True:
            # reduced costs
            col = None
            for j in range(allowed):
                if j in basis:
                    continue
                rc = obj[j] - sum((obj[basis[i]] * tab[i][j] for i in range(m) if tab[i][j]),
                                  zero)
                if rc > 0:
                    col = j
                    break
            if col is None:
                return "optimal"
            best = None
            for i in range(m):
                if tab[i][col] > 0:
                    ratio = tab[i][ncol] / tab[i][col]
                    if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                        best = (ratio, i)
            if best is None:
                return "unbounded"
            pivot(best[1], col)

    art_start = nx + n_ub
    if any(b >= art_start for b in basis):
        obj1 = [zero] * ncol
        for j in range(art_start, ncol):
            obj1[j] = Fraction(-1)
        run(obj1, ncol)
        infeas = sum((tab[i][ncol] for i in range(m) if basis[i] >= art_start), zero)
        if infeas > 0:
            return "infeasible", None, None
        # drive remaining artificials out of the basis
        for i in range(m):
            if basis[i] >= art_start:
                col = next((j for j in range(art_start) if tab[i][j] != 0), None)
                if col is not None:
                    pivot(i, col)
        keep = [i for i in range(m) if basis[i] < art_start]
        tab[:] = [tab[i] for i in keep]
        basis[:] = [basis[i] for i in keep]
        m = len(tab)
    obj2 = [zero] * ncol
    for j in range(n):
        obj2[j] = to_fraction(c[j])
        obj2[n + j] = -to_fraction(c[j])
    status = run(obj2, art_start)
    if status == "unbounded":
        return "unbounded", None, None
    xfull = [zero] * ncol
    for i in range(m):
        xfull[basis[i]] = tab[i][ncol]
    x = tuple(xfull[j] - xfull[n + j] for j in range(n))
    return "optimal", x, dot(c, x)
