"""Multi-probe sweeps, envelope carving and boundary extraction.

Each probe yields an estimated distance to the cavity; every ball around a
probe with radius safely below that distance is provably cavity-free, so
the union of such balls carves away the region the cavity cannot occupy.
The cavity envelope reachable from the probe side is the boundary between
carved and possible cells, extracted by marching squares.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import CavityShape, SlabGeometry, convex_hull, polygonize_cavity
from .indicator import DistanceEstimate, IndicatorError, estimate_distance
from .probe import HGrid, ProbeError
from .solver import Scene


class ReconstructError(RuntimeError):
    """Reconstruction failure (no usable probes, degenerate mask, ...)."""


OK = "OK"
NOT_DETECTED = "NOT_DETECTED"


@dataclass(frozen=True)
class ProbeSet:
    """Probe centers and per-probe phase axes."""

    points: np.ndarray  # (k, 2)
    axes: np.ndarray    # (k, 2)

    def __len__(self):
        return len(self.points)

    @staticmethod
    def from_line(slab: SlabGeometry, side: str, count: int, spacing: float,
                  center_x: float = 0.0, offset: float = 0.2) -> "ProbeSet":
        """Evenly spaced probes on a horizontal line above or below the slab."""
        if count < 1:
            raise ProbeError("probe line needs count >= 1")
        if offset <= 0:
            raise ProbeError("probe line offset must be positive")
        if side == "above":
            y = slab.d2 + offset
        elif side == "below":
            y = slab.d1 - offset
        else:
            raise ProbeError(f"unknown probe line side {side!r}")
        xs = center_x + (np.arange(count) - (count - 1) / 2.0) * spacing
        pts = np.column_stack([xs, np.full(count, y)])
        axes = np.tile([1.0, 0.0], (count, 1))
        return ProbeSet(pts, axes)

    @staticmethod
    def explicit(points, axes=None) -> "ProbeSet":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if axes is None:
            ax = np.tile([1.0, 0.0], (len(pts), 1))
        else:
            ax = np.atleast_2d(np.asarray(axes, dtype=float))
        return ProbeSet(pts, ax)


@dataclass(frozen=True)
class ProbeRecord:
    probe_id: int
    p: tuple
    status: str
    d_hat: float  # nan when not detected
    n_bisections: int
    estimate: DistanceEstimate | None


@dataclass(frozen=True)
class DistanceMap:
    records: tuple

    def ok_records(self):
        return [r for r in self.records if r.status == OK]


def sweep(scene: Scene, probes: ProbeSet, grid: HGrid, t_lo: float, t_hi: float,
          tol: float = 0.01, tau: float = 0.10, localized: bool = True,
          delta_rel: float = 0.1, workers: int = 1) -> DistanceMap:
    """Estimate the cavity distance from every probe; failures become statuses.

    Probes are independent tasks over the shared immutable factorizations;
    results are merged by probe index so the output does not depend on the
    worker count.
    """

    def run(i):
        p = probes.points[i]
        axis = tuple(probes.axes[i])
        try:
            est = estimate_distance(scene, i, p, t_lo, t_hi, grid, tol=tol, tau=tau,
                                    localized=localized, delta_rel=delta_rel, axis=axis)
            return ProbeRecord(i, tuple(p), OK, est.d_hat, est.n_bisections, est)
        except (IndicatorError, ProbeError):
            return ProbeRecord(i, tuple(p), NOT_DETECTED, float("nan"), 0, None)

    if workers <= 1 or len(probes) <= 1:
        records = [run(i) for i in range(len(probes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run, range(len(probes))))
    records.sort(key=lambda r: r.probe_id)
    return DistanceMap(tuple(records))


# ---------------------------------------------------------------------------
# carving


@dataclass(frozen=True)
class RegionMask:
    """Uniform cell grid over the truncated slab; True cells are carved
    (proven outside the cavity up to the margin)."""

    origin: tuple       # lower-left corner of cell (0, 0)
    spacing: float
    carved: np.ndarray  # (ny, nx) bool

    @property
    def shape(self):
        return self.carved.shape

    def cell_centers(self):
        ny, nx = self.carved.shape
        xs = self.origin[0] + (np.arange(nx) + 0.5) * self.spacing
        ys = self.origin[1] + (np.arange(ny) + 0.5) * self.spacing
        return xs, ys


def carve(slab: SlabGeometry, distance_map: DistanceMap, grid_resolution: float,
          margin: float) -> RegionMask:
    """Mark cells whose center lies inside some ball of radius d_hat - margin.

    margin couples the bisection tolerance and the mesh size so the carved
    region stays sound against both error sources.
    """
    ok = distance_map.ok_records()
    if not ok:
        raise ReconstructError("nothing to carve: no probe detected the cavity")
    nx = max(1, int(round(2 * slab.halfwidth / grid_resolution)))
    ny = max(1, int(round(slab.thickness / grid_resolution)))
    xs = -slab.halfwidth + (np.arange(nx) + 0.5) * grid_resolution
    ys = slab.d1 + (np.arange(ny) + 0.5) * grid_resolution
    X, Y = np.meshgrid(xs, ys)
    carved = np.zeros((ny, nx), dtype=bool)
    for rec in ok:
        r = rec.d_hat - margin
        if r <= 0:
            continue
        carved |= (X - rec.p[0]) ** 2 + (Y - rec.p[1]) ** 2 < r * r
    return RegionMask((-slab.halfwidth, slab.d1), grid_resolution, carved)


# ---------------------------------------------------------------------------
# marching squares


@dataclass(frozen=True)
class BoundaryEstimate:
    """Polylines separating carved from possible cells; each is closed or
    terminates on the slab-face/lateral edges of the mask."""

    polylines: tuple  # of (m, 2) float arrays
    closed: tuple     # of bool

    def all_vertices(self):
        if not self.polylines:
            return np.empty((0, 2))
        return np.vstack(self.polylines)


def extract_boundary(mask: RegionMask) -> BoundaryEstimate:
    """March the carved/possible interface; vertices at cell-edge midpoints.

    Saddle blocks (two carved cells diagonal to each other) are resolved by
    always separating the carved diagonal, a fixed convention that keeps the
    output deterministic.
    """
    c = mask.carved
    if not c.any() or c.all():
        raise ReconstructError("mask is degenerate: all cells carry one flag")
    ny, nx = c.shape
    h = mask.spacing
    ox, oy = mask.origin

    def center(ix, iy):
        return (ox + (ix + 0.5) * h, oy + (iy + 0.5) * h)

    segments = []
    # 2x2 cell blocks; corner order: a=(ix,iy) b=(ix+1,iy) c2=(ix+1,iy+1) d=(ix,iy+1)
    for iy in range(ny - 1):
        for ix in range(nx - 1):
            a = c[iy, ix]
            b = c[iy, ix + 1]
            cc = c[iy + 1, ix + 1]
            d = c[iy + 1, ix]
            code = (a << 0) | (b << 1) | (cc << 2) | (d << 3)
            if code in (0, 15):
                continue
            pa = center(ix, iy)
            pb = center(ix + 1, iy)
            pc = center(ix + 1, iy + 1)
            pd = center(ix, iy + 1)
            bottom = ((pa[0] + pb[0]) / 2, pa[1])
            right = (pb[0], (pb[1] + pc[1]) / 2)
            top = ((pd[0] + pc[0]) / 2, pd[1])
            left = (pa[0], (pa[1] + pd[1]) / 2)
            table = {
                1: [(left, bottom)],
                2: [(bottom, right)],
                3: [(left, right)],
                4: [(right, top)],
                6: [(bottom, top)],
                7: [(left, top)],
                8: [(top, left)],
                9: [(top, bottom)],
                11: [(top, right)],
                12: [(right, left)],
                13: [(right, bottom)],
                14: [(bottom, left)],
                5: [(left, bottom), (right, top)],   # carved diagonal a-c
                10: [(bottom, right), (top, left)],  # carved diagonal b-d
            }
            segments.extend(table[code])

    return BoundaryEstimate(*_chain_segments(segments))


def _chain_segments(segments):
    """Join segments into polylines by endpoint matching."""
    if not segments:
        return tuple(), tuple()
    key = lambda p: (round(p[0], 12), round(p[1], 12))
    adj = {}
    for i, (p, q) in enumerate(segments):
        adj.setdefault(key(p), []).append((i, 0))
        adj.setdefault(key(q), []).append((i, 1))
    used = [False] * len(segments)
    polylines = []
    closed_flags = []

    def walk(start_i, start_end):
        pts = []
        i, end = start_i, start_end
        used[i] = True
        p, q = segments[i]
        if end == 0:
            pts.extend([p, q])
            cur = q
        else:
            pts.extend([q, p])
            cur = p
        while True:
            nxt = None
            for (j, jend) in adj.get(key(cur), []):
                if not used[j]:
                    nxt = (j, jend)
                    break
            if nxt is None:
                return pts
            j, jend = nxt
            used[j] = True
            p, q = segments[j]
            cur = q if jend == 0 else p
            pts.append(cur)

    # open chains first: start from endpoints of degree 1
    degree = {k: len(v) for k, v in adj.items()}
    for i, (p, q) in enumerate(segments):
        if used[i]:
            continue
        if degree[key(p)] == 1:
            pts = walk(i, 0)
        elif degree[key(q)] == 1:
            pts = walk(i, 1)
        else:
            continue
        polylines.append(np.asarray(pts))
        closed_flags.append(False)
    for i in range(len(segments)):
        if not used[i]:
            pts = walk(i, 0)
            closed = key(tuple(pts[0])) == key(tuple(pts[-1]))
            polylines.append(np.asarray(pts))
            closed_flags.append(closed)
    return tuple(polylines), tuple(closed_flags)


# ---------------------------------------------------------------------------
# evaluation against ground truth


def evaluate(estimate: BoundaryEstimate, truth: CavityShape, probes: ProbeSet,
             band: float, boundary_samples: int = 720) -> dict:
    """Compare the extracted envelope against the true cavity boundary.

    Spherical fronts can only touch the boundary at nearest-point witnesses,
    so the scored ("probed side") part of the boundary is the set of samples
    that are the nearest boundary point of some position along the probe
    line; the rest of the boundary is invisible to ball probing from these
    centers.  The carved envelope also contains arcs far from the cavity
    wherever no probe constrains the region, so the one-sided distance runs
    from probed truth samples to the estimate polylines.

    Returns hausdorff_probed (max over probed samples of the distance to
    the estimate), coverage (fraction of probed samples within `band`), and
    n_illuminated.
    """
    theta = np.linspace(0, 2 * np.pi, boundary_samples, endpoint=False)
    samples = truth.boundary_point(theta)

    illuminated = _witness_arc(samples, probes)
    if not illuminated.any():
        raise ReconstructError("no boundary sample is probed from the probe line")

    verts = estimate.all_vertices()
    if len(verts) == 0:
        raise ReconstructError("empty boundary estimate")

    dists = np.empty(len(samples))
    for k, s in enumerate(samples):
        best = np.inf
        for line in estimate.polylines:
            seg = np.hypot(line[:, 0] - s[0], line[:, 1] - s[1]).min()
            best = min(best, seg)
        dists[k] = best
    # hausdorff on the probed arc only; coverage over the whole boundary,
    # so one-sided probing reports the unprobed far side as uncovered
    return {
        "hausdorff_probed": float(dists[illuminated].max()),
        "coverage": float((dists <= band).mean()),
        "n_illuminated": int(illuminated.sum()),
        "band": float(band),
    }


def _witness_arc(samples: np.ndarray, probes: ProbeSet, density: int = 64) -> np.ndarray:
    """Mark samples that are nearest-boundary witnesses of the probe line.

    Probe centers are swept as a polyline (consecutive probes joined); each
    swept position marks its closest boundary sample, and the marks are
    dilated by one sample to close sweep gaps.
    """
    pts = probes.points
    sweep_pts = []
    if len(pts) == 1:
        sweep_pts = [pts[0]]
    else:
        for a, b in zip(pts[:-1], pts[1:]):
            for s in np.linspace(0.0, 1.0, density, endpoint=False):
                sweep_pts.append(a + s * (b - a))
        sweep_pts.append(pts[-1])
    marked = np.zeros(len(samples), dtype=bool)
    for p in sweep_pts:
        d2 = (samples[:, 0] - p[0]) ** 2 + (samples[:, 1] - p[1]) ** 2
        marked[int(np.argmin(d2))] = True
    return marked | np.roll(marked, 1) | np.roll(marked, -1)


def convex_hull_cavity(truth: CavityShape, segments: int = 128):
    """The cavity's convex hull as an explicit polygon cavity.

    Sweeping the hull scene through the same pipeline gives the carve a
    convex obstacle would admit, with the same estimation bias as the true
    scene, so the carved-area difference isolates the concavity effect.
    """
    from .geometry import PolygonCavity

    hull = convex_hull(polygonize_cavity(truth, segments).vertices)
    return PolygonCavity(tuple(map(tuple, hull)))


def compare_carves(slab: SlabGeometry, dmap_true: DistanceMap, dmap_hull: DistanceMap,
                   grid_resolution: float, margin: float) -> dict:
    """Carved areas of the measured scene vs its convex-hull twin."""
    mask = carve(slab, dmap_true, grid_resolution, margin)
    mask_hull = carve(slab, dmap_hull, grid_resolution, margin)
    cell = grid_resolution**2
    return {
        "carved_area": float(mask.carved.sum() * cell),
        "hull_carved_area": float(mask_hull.carved.sum() * cell),
        "extra_cells": int(mask.carved.sum()) - int(mask_hull.carved.sum()),
    }
