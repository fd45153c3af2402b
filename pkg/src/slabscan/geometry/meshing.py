"""Nested conforming triangulations of the truncated slab.

Two meshes are built from one vertex set: the `holed` mesh triangulates the
slab minus the cavity polygon, and the `full` mesh is the holed mesh plus a
triangulation of the cavity polygon that uses only the cavity boundary
nodes.  Because the holed triangles are literally a subset of the full
triangles (same vertex array, same indices), the discrete energy-gap
identity holds to solver precision.

The background layout is an anchored offset grid (columns at integer
multiples of the target edge around x = 0, rows spanning the strip), so
enlarging the lateral truncation only appends triangles near the walls and
leaves the mesh around the cavity bitwise unchanged.  Quality around the
cavity is restored by Delaunay refinement (circumcenter insertion with
midpoint splitting of encroached cavity edges).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .shapes import CavityPolygon, SlabGeometry, points_in_polygon, shoelace_area


class MeshError(ValueError):
    """Mesh generation failed or produced an invalid mesh."""


class EdgeTag(IntEnum):
    SLAB_BOTTOM = 0
    SLAB_TOP = 1
    LATERAL = 2
    CAVITY = 3


@dataclass(frozen=True)
class TriMesh:
    """Conforming triangle mesh with tagged boundary edges.

    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counterclockwise
    boundary_edges : (ne, 2) int array
    boundary_tags : (ne,) int array of EdgeTag values
    edge_target : requested edge length
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    edge_target: float

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * (
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
        )

    def min_angle_deg(self, triangles: np.ndarray | None = None) -> float:
        tris = self.triangles if triangles is None else triangles
        return float(np.degrees(np.min(triangle_angles(self.vertices, tris))))

    def boundary_nodes(self, *tags: EdgeTag) -> np.ndarray:
        """Sorted node indices lying on boundary edges with any of the tags."""
        if not tags:
            mask = np.ones(len(self.boundary_edges), dtype=bool)
        else:
            mask = np.isin(self.boundary_tags, [int(t) for t in tags])
        return np.unique(self.boundary_edges[mask])

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices).tobytes())
        h.update(np.ascontiguousarray(self.triangles.astype(np.int64)).tobytes())
        h.update(np.ascontiguousarray(self.boundary_edges.astype(np.int64)).tobytes())
        h.update(np.ascontiguousarray(self.boundary_tags.astype(np.int64)).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class NestedMeshPair:
    """holed = mesh of the slab minus the cavity; full = holed + hole triangles.

    hole_triangles indexes rows of full.triangles; holed.triangles are rows
    0..n_holed-1 of full.triangles, so the subset relation is exact.
    """

    holed: TriMesh
    full: TriMesh
    hole_triangles: np.ndarray
    cavity_chain: np.ndarray  # CCW cycle of cavity-boundary vertex indices

    def validate(self, min_angle_deg: float = 20.0, check_quality: bool = True):
        holed, full = self.holed, self.full
        n = holed.n_vertices
        if full.n_vertices < n or not np.array_equal(full.vertices[:n], holed.vertices):
            raise MeshError("full mesh vertices must extend the holed mesh vertices")
        if len(full.triangles) < len(holed.triangles) or not np.array_equal(
                full.triangles[: len(holed.triangles)], holed.triangles):
            raise MeshError("holed triangles are not a prefix subset of full triangles")
        if np.any(holed.signed_areas() <= 0) or np.any(full.signed_areas() <= 0):
            raise MeshError("found non-positively-oriented triangle")
        if check_quality and len(holed.triangles):
            for name, mesh in (("holed", holed), ("full", full)):
                ang = mesh.min_angle_deg()
                if ang < min_angle_deg - 1e-9:
                    raise MeshError(f"{name} mesh min angle {ang:.2f} below floor {min_angle_deg}")
        if np.any(full.boundary_tags == int(EdgeTag.CAVITY)):
            raise MeshError("full mesh must not expose cavity boundary edges")


def triangle_angles(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Interior angles (radians) of each triangle, shape (nt, 3)."""
    p = vertices[triangles]
    out = np.empty((len(triangles), 3))
    for k in range(3):
        a = p[:, (k + 1) % 3] - p[:, k]
        b = p[:, (k + 2) % 3] - p[:, k]
        na = np.hypot(a[:, 0], a[:, 1])
        nb = np.hypot(b[:, 0], b[:, 1])
        cosang = np.clip((a * b).sum(axis=1) / (na * nb), -1.0, 1.0)
        out[:, k] = np.arccos(cosang)
    return out


# ---------------------------------------------------------------------------
# background grid


def _base_points(slab: SlabGeometry, dx: float, jitter: float, seed: int):
    """Anchored offset grid covering the rectangle.

    Columns sit at multiples of dx around x=0 and rows at an exact division
    of the strip thickness, so a wider truncation reproduces the interior
    point set exactly.  Returns (points, on_wall mask).
    """
    w = slab.halfwidth
    nx = int(np.ceil(w / dx - 1e-12))
    if not np.isclose(nx * dx, w, rtol=0, atol=1e-12):
        raise MeshError("halfwidth must be an integer multiple of the target edge "
                        "(snap it with snap_halfwidth)")
    ny = max(2, int(round(slab.thickness / (dx * np.sqrt(3.0) / 2.0))))
    ys = np.linspace(slab.d1, slab.d2, ny + 1)

    pts = []
    wall = []
    for i, y in enumerate(ys):
        if i % 2 == 0:
            xs = np.arange(-nx, nx + 1) * dx
            pts.append(np.column_stack([xs, np.full(len(xs), y)]))
            wall.append(np.abs(np.abs(xs) - w) < 1e-12)
        else:
            # mirror-symmetric offset row plus exact wall points
            half = (np.arange(0, nx) + 0.5) * dx
            xs = np.concatenate([[-w], -half[::-1], half, [w]])
            pts.append(np.column_stack([xs, np.full(len(xs), y)]))
            m = np.zeros(len(xs), dtype=bool)
            m[0] = m[-1] = True
            wall.append(m)
    points = np.vstack(pts)
    on_wall = np.concatenate(wall)

    if jitter > 0:
        # Hash-anchored displacement so the jitter of a point does not depend
        # on the truncation width or on array order.
        rng_offsets = np.empty_like(points)
        for k, (x, y) in enumerate(points):
            hsh = hashlib.sha256(f"{seed}:{x:.12e}:{y:.12e}".encode()).digest()
            u = int.from_bytes(hsh[:8], "little") / 2**64
            v = int.from_bytes(hsh[8:16], "little") / 2**64
            rng_offsets[k] = (u - 0.5, v - 0.5)
        interior = (
            ~on_wall
            & (points[:, 1] > slab.d1 + 1e-12)
            & (points[:, 1] < slab.d2 - 1e-12)
        )
        points[interior] += jitter * dx * rng_offsets[interior]
    return points, on_wall


def snap_halfwidth(halfwidth: float, target_edge: float) -> float:
    """Round the truncation halfwidth up to a multiple of the target edge."""
    return float(np.ceil(halfwidth / target_edge - 1e-12) * target_edge)


# ---------------------------------------------------------------------------
# cavity chain helpers


def _edge_set(triangles: np.ndarray) -> set:
    e = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e.sort(axis=1)
    return set(map(tuple, e))


def _chain_edges(chain: list) -> list:
    return [(chain[i], chain[(i + 1) % len(chain)]) for i in range(len(chain))]


def _circumcenters(vertices: np.ndarray, tris: np.ndarray) -> np.ndarray:
    a = vertices[tris[:, 0]]
    b = vertices[tris[:, 1]]
    c = vertices[tris[:, 2]]
    d = 2 * ((a[:, 0] * (b[:, 1] - c[:, 1])) + (b[:, 0] * (c[:, 1] - a[:, 1]))
             + (c[:, 0] * (a[:, 1] - b[:, 1])))
    a2 = (a * a).sum(axis=1)
    b2 = (b * b).sum(axis=1)
    c2 = (c * c).sum(axis=1)
    ux = (a2 * (b[:, 1] - c[:, 1]) + b2 * (c[:, 1] - a[:, 1]) + c2 * (a[:, 1] - b[:, 1])) / d
    uy = (a2 * (c[:, 0] - b[:, 0]) + b2 * (a[:, 0] - c[:, 0]) + c2 * (b[:, 0] - a[:, 0])) / d
    return np.column_stack([ux, uy])


# ---------------------------------------------------------------------------
# hole triangulation (boundary nodes only)


def _triangulate_hole(verts: np.ndarray, chain: list, seed_points: np.ndarray,
                      min_angle_deg: float, max_rounds: int = 40):
    """Quality-triangulate the cavity polygon, conforming to the fixed chain.

    The chain (and hence the holed mesh it borders) is immutable here, so
    refinement only ever inserts interior points; a circumcenter that would
    encroach a chain edge is skipped.  Returns (interior_points, triangles)
    with triangle indices local to [chain..., interior...].
    """
    chain_pts = verts[np.asarray(chain, dtype=int)]
    n_chain = len(chain_pts)
    local = np.vstack([chain_pts, seed_points]) if len(seed_points) else chain_pts.copy()

    ca = chain_pts
    cb = np.roll(chain_pts, -1, axis=0)
    mids = 0.5 * (ca + cb)
    rad2 = 0.25 * ((ca - cb) ** 2).sum(axis=1)
    chain_edge_keys = {tuple(sorted((i, (i + 1) % n_chain))) for i in range(n_chain)}

    for _ in range(max_rounds):
        _, tris = _delaunay(local)
        edges = _edge_set(tris)
        if not chain_edge_keys <= edges:
            raise MeshError("cavity boundary not recovered inside the hole")
        centroids = local[tris].mean(axis=1)
        keep = points_in_polygon(centroids, chain_pts)
        hole_tris = tris[keep]
        angles = triangle_angles(local, hole_tris)
        bad = np.where(np.degrees(angles.min(axis=1)) < min_angle_deg)[0]
        if len(bad) == 0:
            return local[n_chain:], hole_tris

        bad_tris = hole_tris[bad]
        centers = _circumcenters(local, bad_tris)
        radii = np.hypot(local[bad_tris[:, 0], 0] - centers[:, 0],
                         local[bad_tris[:, 0], 1] - centers[:, 1])
        worst = triangle_angles(local, bad_tris).min(axis=1)
        order = np.lexsort((centers[:, 1], centers[:, 0], worst))
        inside = points_in_polygon(centers, chain_pts)
        d2 = ((centers[:, None, :] - mids[None, :, :]) ** 2).sum(axis=-1)
        encroaches = (d2 < rad2[None, :] * (1.0 - 1e-12)).any(axis=1)

        accepted = []
        accepted_r = []
        for idx in order:
            if not inside[idx] or encroaches[idx]:
                continue
            c = centers[idx]
            ok = True
            for q, rq in zip(accepted, accepted_r):
                lim = 0.75 * max(radii[idx], rq)
                if (c[0] - q[0]) ** 2 + (c[1] - q[1]) ** 2 < lim * lim:
                    ok = False
                    break
            if ok:
                accepted.append(c)
                accepted_r.append(radii[idx])
        if not accepted:
            raise MeshError("hole refinement stalled below the angle floor")
        pts = np.asarray(accepted)
        d, _ = cKDTree(local).query(pts)
        pts = pts[d > 1e-9]
        if not len(pts):
            raise MeshError("hole refinement stalled below the angle floor")
        local = np.vstack([local, pts])
    raise MeshError("hole refinement did not converge")


# ---------------------------------------------------------------------------
# main mesher


def build_nested_meshes(
    slab: SlabGeometry,
    cavity_polygon: CavityPolygon | None,
    target_edge: float,
    min_angle_deg: float = 20.0,
    jitter: float = 0.0,
    seed: int = 0,
    max_rounds: int = 40,
) -> NestedMeshPair:
    """Build the holed/full mesh pair for a slab with an optional cavity.

    Parameters
    ----------
    slab : SlabGeometry
        halfwidth must be a multiple of target_edge (see snap_halfwidth).
    cavity_polygon : CavityPolygon or None
        CCW polygon strictly inside the rectangle; None or empty means no
        cavity, in which case holed and full are the same mesh.
    target_edge : background grid pitch.
    min_angle_deg : quality floor enforced on the domain triangles.

    Raises
    ------
    MeshError on coarse-mesh/cavity mismatch or refinement failure.
    """
    if target_edge <= 0:
        raise MeshError("target_edge must be positive")
    points, _ = _base_points(slab, target_edge, jitter, seed)

    if cavity_polygon is None or cavity_polygon.n == 0:
        verts, tris = _delaunay(points)
        mesh = _finish_mesh(slab, verts, tris, [], target_edge)
        return NestedMeshPair(mesh, mesh, np.empty(0, dtype=int), np.empty(0, dtype=int))

    poly = cavity_polygon.vertices
    lo = poly.min(axis=0)
    hi = poly.max(axis=0)
    feature = min(hi[0] - lo[0], hi[1] - lo[1])
    if target_edge > 0.5 * feature:
        raise MeshError("mesh too coarse for cavity")
    if not (lo[1] > slab.d1 and hi[1] < slab.d2 and
            lo[0] > -slab.halfwidth and hi[0] < slab.halfwidth):
        raise MeshError("cavity polygon must lie strictly inside the rectangle")

    # clear background points near the cavity boundary; the ones strictly
    # inside seed the hole triangulation later
    buffer = 0.7 * target_edge
    inside = points_in_polygon(points, poly)
    near = np.zeros(len(points), dtype=bool)
    cand = np.where(
        (points[:, 0] > lo[0] - buffer) & (points[:, 0] < hi[0] + buffer)
        & (points[:, 1] > lo[1] - buffer) & (points[:, 1] < hi[1] + buffer)
    )[0]
    if len(cand):
        from .shapes import _point_segment_distances

        for k in cand:
            d = _point_segment_distances(points[k], poly, np.roll(poly, -1, axis=0))
            if d.min() < buffer:
                near[k] = True
    hole_seeds = points[inside & ~near]
    points = points[~(inside | near)]

    chain = list(range(len(points), len(points) + len(poly)))
    points = np.vstack([points, poly])

    verts = points
    tris = None
    for _ in range(max_rounds):
        verts, tris = _delaunay(verts)
        edges = _edge_set(tris)

        # conformity: every cavity chain edge must be present
        missing = [e for e in _chain_edges(chain) if tuple(sorted(e)) not in edges]
        if missing:
            verts, chain = _split_chain_edges(verts, chain, missing)
            continue

        centroids = verts[tris].mean(axis=1)
        in_hole = points_in_polygon(centroids, verts[np.asarray(chain)])
        domain_tris = tris[~in_hole]

        angles = triangle_angles(verts, domain_tris)
        bad = np.where(np.degrees(angles.min(axis=1)) < min_angle_deg)[0]
        if len(bad) == 0:
            break

        verts, chain, changed = _refine(verts, tris, domain_tris, bad, chain, slab,
                                        min_split_len=0.02 * target_edge)
        if not changed:
            break
    else:
        raise MeshError("mesh refinement did not converge")

    verts, tris = _delaunay(verts)
    final_edges = _edge_set(tris)
    missing = [e for e in _chain_edges(chain) if tuple(sorted(e)) not in final_edges]
    if missing:
        raise MeshError("cavity boundary lost during refinement")
    centroids = verts[tris].mean(axis=1)
    chain_arr = np.asarray(chain, dtype=int)
    in_hole = points_in_polygon(centroids, verts[chain_arr])
    domain_tris = tris[~in_hole]
    ang = float(np.degrees(triangle_angles(verts, domain_tris).min()))
    if ang < min_angle_deg - 1e-9:
        raise MeshError(f"refinement finished with min angle {ang:.2f} deg")

    holed = _finish_mesh(slab, verts, domain_tris, chain, target_edge)

    interior_pts, hole_local = _triangulate_hole(verts, chain, hole_seeds, min_angle_deg)
    # local indices: [0..n_chain) are chain nodes, the rest are appended
    lut = np.concatenate([chain_arr, len(verts) + np.arange(len(interior_pts))])
    hole = lut[hole_local]
    verts_all = np.vstack([verts, interior_pts]) if len(interior_pts) else verts
    hole = _orient_ccw(verts_all, hole)

    full_tris = np.vstack([holed.triangles, hole])
    full = _finish_mesh(slab, verts_all, full_tris, [], target_edge)
    hole_idx = np.arange(len(holed.triangles), len(full_tris))

    pair = NestedMeshPair(holed, full, hole_idx, chain_arr)
    _check_hole_area(pair, verts_all)
    pair.validate(min_angle_deg)
    return pair


def _delaunay(points: np.ndarray):
    tri = Delaunay(points)
    return points, _orient_ccw(points, tri.simplices.astype(np.int64))


def _orient_ccw(verts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    p = verts[tris]
    area2 = (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )
    tris = tris.copy()
    flip = area2 < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return tris


def _split_chain_edges(verts: np.ndarray, chain: list, edges: list):
    """Insert midpoints of the given chain edges (keeps points on the polygon).

    edges must be (a, b) pairs in chain order; each vertex has one successor
    so keying by the first endpoint is unambiguous.
    """
    edge_set = set(edges)
    new_pts = []
    insert_after = {}
    for (a, b) in edges:
        mid = 0.5 * (verts[a] + verts[b])
        insert_after[a] = len(verts) + len(new_pts)
        new_pts.append(mid)
    out_chain = []
    for i, a in enumerate(chain):
        out_chain.append(a)
        b = chain[(i + 1) % len(chain)]
        if (a, b) in edge_set:
            out_chain.append(insert_after[a])
    return np.vstack([verts, np.asarray(new_pts)]), out_chain


def _refine(verts, tris, domain_tris, bad, chain, slab, min_split_len):
    """One batch of Ruppert-style insertions for the bad domain triangles.

    Candidate circumcenters are thinned greedily so that accepted insertions
    keep a mutual spacing proportional to their circumradius; without this,
    adjacent skinny triangles insert adjacent centers and the refinement
    front never coarsens.
    """
    bad_tris = domain_tris[bad]
    centers = _circumcenters(verts, bad_tris)
    radii = np.hypot(verts[bad_tris[:, 0], 0] - centers[:, 0],
                     verts[bad_tris[:, 0], 1] - centers[:, 1])
    worst = triangle_angles(verts, bad_tris).min(axis=1)
    order = np.lexsort((centers[:, 1], centers[:, 0], worst))

    chain_arr = np.asarray(chain)
    ca = verts[chain_arr]
    cb = verts[np.roll(chain_arr, -1)]
    mids = 0.5 * (ca + cb)
    rad2 = 0.25 * ((ca - cb) ** 2).sum(axis=1)
    chain_pairs = _chain_edges(chain)
    chain_lookup = {tuple(sorted(e)): e for e in chain_pairs}

    w = slab.halfwidth
    inside_rect = ((centers[:, 0] >= -w) & (centers[:, 0] <= w)
                   & (centers[:, 1] >= slab.d1) & (centers[:, 1] <= slab.d2))
    in_hole = np.zeros(len(centers), dtype=bool)
    if inside_rect.any():
        in_hole[inside_rect] = points_in_polygon(centers[inside_rect], ca)
    d2 = ((centers[:, None, :] - mids[None, :, :]) ** 2).sum(axis=-1)
    encroaches = d2 < rad2[None, :] * (1.0 - 1e-12)

    split_set = []
    split_seen = set()
    accepted = []
    accepted_r = []

    def queue_split(edge_key):
        if edge_key in split_seen or edge_key not in chain_lookup:
            return
        a, b = chain_lookup[edge_key]
        if np.hypot(*(verts[a] - verts[b])) < min_split_len:
            return
        split_seen.add(edge_key)
        split_set.append(chain_lookup[edge_key])

    for idx in order:
        c = centers[idx]
        hit = np.where(encroaches[idx])[0]
        if len(hit):
            for j in hit:
                queue_split(tuple(sorted((int(chain_arr[j]),
                                          int(chain_arr[(j + 1) % len(chain_arr)])))))
            continue
        if not inside_rect[idx] or in_hole[idx]:
            tri = bad_tris[idx]
            p = verts[tri]
            lens = [np.hypot(*(p[(k + 1) % 3] - p[k])) for k in range(3)]
            k = int(np.argmax(lens))
            key = tuple(sorted((int(tri[k]), int(tri[(k + 1) % 3]))))
            if key in chain_lookup:
                queue_split(key)
            else:
                mid = 0.5 * (p[k] + p[(k + 1) % 3])
                accepted.append(mid)
                accepted_r.append(0.5 * lens[k])
            continue
        ok = True
        for q, rq in zip(accepted, accepted_r):
            lim = 0.75 * max(radii[idx], rq)
            if (c[0] - q[0]) ** 2 + (c[1] - q[1]) ** 2 < lim * lim:
                ok = False
                break
        if ok:
            accepted.append(c)
            accepted_r.append(radii[idx])

    changed = False
    if split_set:
        verts, chain = _split_chain_edges(verts, chain, split_set)
        changed = True
    if accepted:
        pts = np.asarray(accepted)
        d, _ = cKDTree(verts).query(pts)
        pts = pts[d > 1e-9]
        if len(pts):
            verts = np.vstack([verts, pts])
            changed = True
    return verts, chain, changed


def _finish_mesh(slab, verts, tris, chain, target_edge) -> TriMesh:
    edges, tags = _tag_boundary(slab, verts, tris, chain)
    return TriMesh(verts, np.ascontiguousarray(tris, dtype=np.int64), edges, tags, target_edge)


def _tag_boundary(slab, verts, tris, chain):
    e = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    key = np.sort(e, axis=1)
    uniq, counts = np.unique(key, axis=0, return_counts=True)
    boundary = uniq[counts == 1]
    chain_set = set(int(c) for c in chain)

    tol = 1e-9 * max(1.0, slab.halfwidth, abs(slab.d1), abs(slab.d2))
    tags = np.empty(len(boundary), dtype=np.int64)
    for i, (a, b) in enumerate(boundary):
        pa, pb = verts[a], verts[b]
        if abs(pa[1] - slab.d2) < tol and abs(pb[1] - slab.d2) < tol:
            tags[i] = int(EdgeTag.SLAB_TOP)
        elif abs(pa[1] - slab.d1) < tol and abs(pb[1] - slab.d1) < tol:
            tags[i] = int(EdgeTag.SLAB_BOTTOM)
        elif abs(abs(pa[0]) - slab.halfwidth) < tol and abs(abs(pb[0]) - slab.halfwidth) < tol:
            tags[i] = int(EdgeTag.LATERAL)
        elif int(a) in chain_set and int(b) in chain_set:
            tags[i] = int(EdgeTag.CAVITY)
        else:
            raise MeshError(f"boundary edge ({a}, {b}) lies on no tagged boundary")
    return np.ascontiguousarray(boundary, dtype=np.int64), tags


def _check_hole_area(pair: NestedMeshPair, verts):
    if len(pair.hole_triangles) == 0:
        return
    hole_tris = pair.full.triangles[pair.hole_triangles]
    p = verts[hole_tris]
    areas = 0.5 * (
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )
    poly_area = shoelace_area(verts[pair.cavity_chain])
    if abs(areas.sum() - poly_area) > 1e-12 * max(poly_area, 1e-30):
        raise MeshError("hole triangulation does not cover the cavity polygon exactly")


# ---------------------------------------------------------------------------
# export


def export_mesh(mesh: TriMesh, path):
    """Write the offset-based ASCII format: vertex count and lines, triangle
    count and index lines, then tagged boundary-edge lines."""
    with open(path, "w") as f:
        f.write(f"{mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        f.write(f"{mesh.n_triangles}\n")
        for a, b, c in mesh.triangles:
            f.write(f"{a} {b} {c}\n")
        f.write(f"{len(mesh.boundary_edges)}\n")
        for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
            f.write(f"{a} {b} {EdgeTag(tag).name}\n")
