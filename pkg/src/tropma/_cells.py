"""Float geometry of convex cells {x : A x <= b} for the Newton solvers.

Each cell reports its volume, first and second moments, and the measure of
its facet on every constraint (keyed by constraint label).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection


@dataclass
class CellGeom:
    vertices: np.ndarray
    volume: float
    moment1: np.ndarray
    moment2: np.ndarray
    facets: dict[int, float] = field(default_factory=dict)

    @property
    def centroid(self) -> np.ndarray:
        return self.moment1 / self.volume if self.volume > 0 else np.full(len(self.moment1), np.nan)


def _empty(n: int) -> CellGeom:
    return CellGeom(np.zeros((0, n)), 0.0, np.zeros(n), np.zeros((n, n)), {})


def simplex_moments(v: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Volume, first and second moments of the simplex with vertex rows v."""
    n = v.shape[1]
    vol = abs(np.linalg.det(v[1:] - v[0])) / np.prod(np.arange(1, n + 1))
    s = v.sum(axis=0)
    m1 = vol * s / (n + 1)
    m2 = vol / ((n + 1) * (n + 2)) * (v.T @ v + np.outer(s, s))
    return vol, m1, m2


def interval_cell(lo: float, hi: float, lo_label: int, hi_label: int) -> CellGeom:
    if hi <= lo:
        return _empty(1)
    geom = CellGeom(np.array([[lo], [hi]]), hi - lo,
                    np.array([(hi * hi - lo * lo) / 2]),
                    np.array([[(hi ** 3 - lo ** 3) / 3]]), {})
    geom.facets[lo_label] = 1.0
    geom.facets[hi_label] = 1.0
    return geom


def clip_interval(lo: float, hi: float, a: np.ndarray, b: np.ndarray,
                  body_labels: tuple[int, int] = (-1, -2)) -> CellGeom:
    """Interval [lo, hi] cut by a_k x <= b_k."""
    lo_lab, hi_lab = body_labels
    pos = a > 0
    neg = a < 0
    if np.any((a == 0) & (b < 0)):
        return _empty(1)
    if pos.any():
        ub = b[pos] / a[pos]
        k = int(np.argmin(ub))
        if ub[k] < hi:
            hi, hi_lab = float(ub[k]), int(np.flatnonzero(pos)[k])
    if neg.any():
        lb = b[neg] / a[neg]
        k = int(np.argmax(lb))
        if lb[k] > lo:
            lo, lo_lab = float(lb[k]), int(np.flatnonzero(neg)[k])
    return interval_cell(lo, hi, lo_lab, hi_lab)


def _clip_polygon(v: np.ndarray, labels: list[int], a: np.ndarray, b: float, lab: int,
                  tol: float):
    d = v @ a - b
    out_v, out_l = [], []
    m = len(v)
    for i in range(m):
        j = (i + 1) % m
        p, q, dp, dq = v[i], v[j], d[i], d[j]
        if dp <= tol:
            out_v.append(p)
            out_l.append(labels[i])
            if dq > tol:
                out_v.append(p + (q - p) * (dp / (dp - dq)))
                out_l.append(lab)
        elif dq <= tol:
            out_v.append(p + (q - p) * (dp / (dp - dq)))
            out_l.append(labels[i])
    if len(out_v) < 3:
        return None, None
    return np.array(out_v), out_l


def polygon_geometry(v: np.ndarray, labels: list[int]) -> CellGeom:
    m = len(v)
    geom = CellGeom(v, 0.0, np.zeros(2), np.zeros((2, 2)), {})
    for i in range(m):
        j = (i + 1) % m
        length = float(np.hypot(*(v[j] - v[i])))
        if length > 0:
            geom.facets[labels[i]] = geom.facets.get(labels[i], 0.0) + length
    for i in range(1, m - 1):
        tri = np.array([v[0], v[i], v[i + 1]])
        cross = (tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1]) - \
                (tri[1, 1] - tri[0, 1]) * (tri[2, 0] - tri[0, 0])
        vol, m1, m2 = simplex_moments(tri)
        sgn = 1.0 if cross >= 0 else -1.0
        geom.volume += sgn * vol
        geom.moment1 += sgn * m1
        geom.moment2 += sgn * m2
    if geom.volume <= 0:
        return _empty(2)
    return geom


def clip_polygon(poly: np.ndarray, poly_labels: list[int], a: np.ndarray, b: np.ndarray,
                 rel_tol: float = 1e-13) -> CellGeom:
    """Counter-clockwise convex polygon cut by the rows of a x <= b."""
    v, labels = poly, list(poly_labels)
    scale = 1.0 + float(np.abs(v).max())
    used = np.zeros(len(b), dtype=bool)
    while len(b):
        viol = (a @ v.T).max(axis=1) - b
        tol = rel_tol * scale * (1.0 + np.linalg.norm(a, axis=1))
        viol = np.where(used, -np.inf, viol - tol)
        k = int(np.argmax(viol))
        if viol[k] <= 0:
            break
        used[k] = True
        v, labels = _clip_polygon(v, labels, a[k], b[k], k, 0.0)
        if v is None:
            return _empty(2)
    return polygon_geometry(v, labels)


def _chebyshev_center(a: np.ndarray, b: np.ndarray):
    norms = np.linalg.norm(a, axis=1)
    n = a.shape[1]
    res = linprog(np.r_[np.zeros(n), -1.0], A_ub=np.c_[a, norms], b_ub=b,
                  bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status != 0:
        return None, 0.0
    return res.x[:n], res.x[n]


def clip_general(a: np.ndarray, b: np.ndarray, labels: list[int], min_radius: float = 1e-12
                 ) -> CellGeom:
    """Bounded cell {a x <= b} in any dimension via Qhull."""
    n = a.shape[1]
    center, radius = _chebyshev_center(a, b)
    if center is None or radius <= min_radius:
        return _empty(n)
    hs = HalfspaceIntersection(np.c_[a, -b], center)
    pts = hs.intersections
    hull = ConvexHull(pts)
    geom = CellGeom(pts[hull.vertices], 0.0, np.zeros(n), np.zeros((n, n)), {})
    apex = pts.mean(axis=0)
    for simplex in hull.simplices:
        face = pts[simplex]
        vol, m1, m2 = simplex_moments(np.vstack([apex, face]))
        geom.volume += vol
        geom.moment1 += m1
        geom.moment2 += m2
        resid = np.abs(a @ face.T - b[:, None]).max(axis=1) / np.linalg.norm(a, axis=1)
        k = int(np.argmin(resid))
        edges = face[1:] - face[0]
        gram = edges @ edges.T
        area = np.sqrt(max(np.linalg.det(gram), 0.0)) / np.prod(np.arange(1, n))
        geom.facets[labels[k]] = geom.facets.get(labels[k], 0.0) + area
    return geom


def ccw_polygon(vertices: np.ndarray) -> np.ndarray:
    c = vertices.mean(axis=0)
    ang = np.arctan2(vertices[:, 1] - c[1], vertices[:, 0] - c[0])
    return vertices[np.argsort(ang)]


def polygon_edge_labels(poly: np.ndarray, a_body: np.ndarray, b_body: np.ndarray) -> list[int]:
    """Label each ccw edge by the body facet (as -1 - index) it lies on."""
    labels = []
    m = len(poly)
    for i in range(m):
        mid = (poly[i] + poly[(i + 1) % m]) / 2
        k = int(np.argmin(np.abs(a_body @ mid - b_body)))
        labels.append(-1 - k)
    return labels
