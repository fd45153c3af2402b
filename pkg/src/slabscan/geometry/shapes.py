"""Slab geometry and cavity shapes.

The computational domain is a horizontal slab strip truncated laterally to a
rectangle (-W, W) x (d1, d2).  A cavity is a simply connected hole strictly
inside the strip; it is always polygonized before meshing, so every shape
only has to provide boundary sampling, point-inside tests and an exact (or
near-exact) distance-to-boundary evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar


class GeometryError(ValueError):
    """Invalid geometric configuration."""


@dataclass(frozen=True)
class SlabGeometry:
    """Truncated slab: the rectangle (-halfwidth, halfwidth) x (d1, d2).

    d1/d2 are the lower/upper slab planes; halfwidth is the lateral
    truncation used for meshing only (the physical strip is unbounded).
    """

    d1: float
    d2: float
    halfwidth: float
    dim: int = 2

    def __post_init__(self):
        if not self.d1 < self.d2:
            raise GeometryError(f"slab planes must satisfy d1 < d2, got {self.d1} >= {self.d2}")
        if self.halfwidth <= 0:
            raise GeometryError("halfwidth must be positive")
        if self.dim != 2:
            raise GeometryError("meshing supports dim=2 only")

    @property
    def thickness(self) -> float:
        return self.d2 - self.d1

    def strip_distance(self, p) -> float:
        """Distance from a point to the infinite strip d1 < y < d2 (0 if inside)."""
        y = float(p[1])
        if y > self.d2:
            return y - self.d2
        if y < self.d1:
            return self.d1 - y
        return 0.0

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (
            (np.abs(pts[:, 0]) <= self.halfwidth)
            & (pts[:, 1] >= self.d1)
            & (pts[:, 1] <= self.d2)
        )


@dataclass(frozen=True)
class CavityPolygon:
    """Closed polygon approximating a cavity boundary (CCW, no repeated last vertex)."""

    vertices: np.ndarray
    max_chord_deviation: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float))

    @property
    def n(self) -> int:
        return len(self.vertices)

    def area(self) -> float:
        return shoelace_area(self.vertices)


# ---------------------------------------------------------------------------
# shapes


class CavityShape:
    """Base class for cavity shapes.  Subclasses implement boundary sampling,
    membership and distance; the mesher only ever sees the polygonized form."""

    def boundary_point(self, theta):
        raise NotImplementedError

    def contains(self, points) -> np.ndarray:
        raise NotImplementedError

    def bounding_box(self):
        poly = polygonize_cavity(self, 512)
        lo = poly.vertices.min(axis=0)
        hi = poly.vertices.max(axis=0)
        return lo, hi

    def distance(self, p) -> float:
        """Euclidean distance from an exterior point to the cavity boundary."""
        poly = polygonize_cavity(self, 2048)
        return polygon_distance(p, poly.vertices)


@dataclass(frozen=True)
class Disc(CavityShape):
    center: tuple
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise GeometryError("disc radius must be positive")

    def boundary_point(self, theta):
        theta = np.asarray(theta, dtype=float)
        c = np.asarray(self.center, dtype=float)
        return np.stack(
            [c[0] + self.radius * np.cos(theta), c[1] + self.radius * np.sin(theta)], axis=-1
        )

    def contains(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        c = np.asarray(self.center, dtype=float)
        return np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1]) < self.radius

    def distance(self, p):
        c = np.asarray(self.center, dtype=float)
        d = float(np.hypot(p[0] - c[0], p[1] - c[1]) - self.radius)
        if d < 0:
            raise GeometryError("point lies inside the cavity")
        return d


@dataclass(frozen=True)
class Ellipse(CavityShape):
    center: tuple
    a: float  # semi-axis along the (rotated) x direction
    b: float
    rotation: float = 0.0  # radians, CCW

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise GeometryError("ellipse semi-axes must be positive")

    def _to_local(self, p):
        c = np.asarray(self.center, dtype=float)
        ct, st = np.cos(self.rotation), np.sin(self.rotation)
        dx, dy = p[0] - c[0], p[1] - c[1]
        return np.array([ct * dx + st * dy, -st * dx + ct * dy])

    def boundary_point(self, theta):
        theta = np.asarray(theta, dtype=float)
        ct, st = np.cos(self.rotation), np.sin(self.rotation)
        x = self.a * np.cos(theta)
        y = self.b * np.sin(theta)
        c = np.asarray(self.center, dtype=float)
        return np.stack([c[0] + ct * x - st * y, c[1] + st * x + ct * y], axis=-1)

    def contains(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(len(pts), dtype=bool)
        for i, p in enumerate(pts):
            q = self._to_local(p)
            out[i] = (q[0] / self.a) ** 2 + (q[1] / self.b) ** 2 < 1.0
        return out

    def distance(self, p):
        # Nearest point via the stationarity equation in the ellipse frame;
        # reduces to a monotone root problem in the Lagrange parameter.
        q = np.abs(self._to_local(p))
        a, b = self.a, self.b
        if (q[0] / a) ** 2 + (q[1] / b) ** 2 < 1.0:
            raise GeometryError("point lies inside the cavity")
        if q[0] < 1e-15:
            if q[1] >= b:
                return float(q[1] - b)
        if q[1] < 1e-15 and q[0] >= a:
            return float(q[0] - a)

        def f(t):
            return (a * q[0] / (t + a * a)) ** 2 + (b * q[1] / (t + b * b)) ** 2 - 1.0

        t_lo = 0.0
        t_hi = max(a, b) * (np.hypot(*q) + max(a, b))
        while f(t_hi) > 0:
            t_hi *= 2.0
        t = brentq(f, t_lo, t_hi, xtol=1e-15, rtol=1e-15)
        xe = a * a * q[0] / (t + a * a)
        ye = b * b * q[1] / (t + b * b)
        return float(np.hypot(q[0] - xe, q[1] - ye))


@dataclass(frozen=True)
class PolygonCavity(CavityShape):
    """Explicit simple polygon, vertices CCW.  The boundary is only piecewise
    smooth; fine for testing the pipeline, not for curvature-sensitive runs."""

    vertices: tuple

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if len(verts) < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        if shoelace_area(verts) <= 0:
            raise GeometryError("polygon vertices must be counterclockwise")
        if _self_intersects(verts):
            raise GeometryError("polygon boundary is self-intersecting")
        object.__setattr__(self, "vertices", tuple(map(tuple, verts)))

    def _verts(self):
        return np.asarray(self.vertices, dtype=float)

    def contains(self, points):
        return points_in_polygon(np.atleast_2d(np.asarray(points, dtype=float)), self._verts())

    def distance(self, p):
        if points_in_polygon(np.array([p], dtype=float), self._verts())[0]:
            raise GeometryError("point lies inside the cavity")
        return polygon_distance(p, self._verts())


@dataclass(frozen=True)
class RadialStar(CavityShape):
    """Star-shaped cavity r(theta) = a0 + sum a_k cos(k theta) + b_k sin(k theta)."""

    center: tuple
    a0: float
    a: tuple = field(default_factory=tuple)
    b: tuple = field(default_factory=tuple)

    def __post_init__(self):
        theta = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
        if np.any(self.radius(theta) <= 0):
            raise GeometryError("radial-star radius function must be strictly positive")

    def radius(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = np.full_like(theta, self.a0)
        for k, ak in enumerate(self.a, start=1):
            r = r + ak * np.cos(k * theta)
        for k, bk in enumerate(self.b, start=1):
            r = r + bk * np.sin(k * theta)
        return r

    def boundary_point(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = self.radius(theta)
        c = np.asarray(self.center, dtype=float)
        return np.stack([c[0] + r * np.cos(theta), c[1] + r * np.sin(theta)], axis=-1)

    def contains(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        c = np.asarray(self.center, dtype=float)
        dx = pts[:, 0] - c[0]
        dy = pts[:, 1] - c[1]
        rho = np.hypot(dx, dy)
        theta = np.arctan2(dy, dx)
        return rho < self.radius(theta)

    def distance(self, p):
        if self.contains(np.array([p], dtype=float))[0]:
            raise GeometryError("point lies inside the cavity")
        # Seed with dense boundary sampling, then refine the boundary
        # parameter locally; accurate to ~1e-10 for smooth r(theta).
        theta = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
        pts = self.boundary_point(theta)
        d2 = (pts[:, 0] - p[0]) ** 2 + (pts[:, 1] - p[1]) ** 2
        i = int(np.argmin(d2))
        t0 = theta[i]
        h = 2 * np.pi / 4096

        def g(t):
            q = self.boundary_point(t)
            return float((q[0] - p[0]) ** 2 + (q[1] - p[1]) ** 2)

        res = minimize_scalar(g, bounds=(t0 - 2 * h, t0 + 2 * h), method="bounded",
                              options={"xatol": 1e-14})
        return float(np.sqrt(min(res.fun, g(t0))))


# ---------------------------------------------------------------------------
# operations


def polygonize_cavity(shape: CavityShape, segments: int) -> CavityPolygon:
    """Approximate the cavity boundary by a CCW polygon with `segments` edges.

    Parameters
    ----------
    shape : CavityShape
    segments : int
        Number of polygon edges (>= 8).  Explicit PolygonCavity shapes are
        passed through unchanged.

    Returns
    -------
    CavityPolygon with the max chord deviation (sampled at edge midpoints).
    """
    if segments < 8:
        raise GeometryError("segments must be >= 8")
    if isinstance(shape, PolygonCavity):
        return CavityPolygon(shape._verts(), 0.0)

    theta = np.linspace(0.0, 2 * np.pi, segments, endpoint=False)
    verts = shape.boundary_point(theta)
    mid_true = shape.boundary_point(theta + np.pi / segments)
    mid_chord = 0.5 * (verts + np.roll(verts, -1, axis=0))
    dev = float(np.max(np.hypot(*(mid_true - mid_chord).T)))
    if shoelace_area(verts) <= 0:
        raise GeometryError("polygonized boundary is not counterclockwise")
    if _self_intersects(verts):
        raise GeometryError("polygonized boundary self-intersects")
    return CavityPolygon(verts, dev)


def cavity_distance(p, shape: CavityShape) -> float:
    """Euclidean distance from a point outside the cavity to its boundary."""
    return shape.distance(np.asarray(p, dtype=float))


def validate_cavity_in_slab(shape: CavityShape, slab: SlabGeometry, margin: float = 0.0):
    """Check the cavity closure lies strictly inside the truncated slab."""
    lo, hi = shape.bounding_box()
    if not (lo[1] > slab.d1 + margin and hi[1] < slab.d2 - margin):
        raise GeometryError(
            f"cavity must lie strictly inside the slab strip "
            f"(got y range [{lo[1]:.4g}, {hi[1]:.4g}] in ({slab.d1}, {slab.d2}))"
        )
    if not (lo[0] > -slab.halfwidth + margin and hi[0] < slab.halfwidth - margin):
        raise GeometryError("cavity must lie strictly inside the lateral truncation")


# ---------------------------------------------------------------------------
# polygon utilities


def shoelace_area(verts: np.ndarray) -> float:
    """Signed area of a closed polygon (positive for CCW)."""
    x = verts[:, 0]
    y = verts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def points_in_polygon(points: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Crossing-number point-in-polygon test, vectorized over points."""
    x = points[:, 0][:, None]
    y = points[:, 1][:, None]
    x1 = verts[:, 0][None, :]
    y1 = verts[:, 1][None, :]
    x2 = np.roll(verts[:, 0], -1)[None, :]
    y2 = np.roll(verts[:, 1], -1)[None, :]
    crosses = (y1 > y) != (y2 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
    hits = crosses & (x < xint)
    return np.sum(hits, axis=1) % 2 == 1


def polygon_distance(p, verts: np.ndarray) -> float:
    """Min distance from a point to a closed polygon boundary (segment projection)."""
    return float(np.min(_point_segment_distances(p, verts, np.roll(verts, -1, axis=0))))


def polyline_distance(p, verts: np.ndarray) -> float:
    """Min distance from a point to an open polyline."""
    if len(verts) == 1:
        return float(np.hypot(p[0] - verts[0, 0], p[1] - verts[0, 1]))
    return float(np.min(_point_segment_distances(p, verts[:-1], verts[1:])))


def _point_segment_distances(p, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    ab = b - a
    ap = p[None, :] - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.divide(np.einsum("ij,ij->i", ap, ab), denom,
                          out=np.zeros_like(denom), where=denom > 0), 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(p[0] - proj[:, 0], p[1] - proj[:, 1])


def _segments_properly_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _self_intersects(verts: np.ndarray) -> bool:
    n = len(verts)
    for i in range(n):
        a1, a2 = verts[i], verts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_properly_intersect(a1, a2, verts[j], verts[(j + 1) % n]):
                return True
    return False


def convex_hull(points: np.ndarray) -> np.ndarray:
    """CCW convex hull vertices (Andrew monotone chain)."""
    pts = sorted(map(tuple, np.asarray(points, dtype=float)))
    if len(pts) <= 2:
        return np.asarray(pts, dtype=float)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.asarray(lower[:-1] + upper[:-1], dtype=float)
