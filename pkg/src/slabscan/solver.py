"""P1 finite-element solver for the conductivity equation on slab meshes.

The outer boundary (slab faces and lateral truncation) carries Dirichlet
data; cavity edges are natural (zero flux).  Boundary measurements are never
differentiated: the pairing of boundary current with boundary voltage is
evaluated as the domain Dirichlet energy of the solution, which is exact in
the weak form.

The energy gap between the cavity-free and cavity solutions is the small
difference of two large energies.  Evaluating it as a literal difference
loses all digits once the probing front is far from the cavity, so the gap
is computed through the algebraically identical difference-of-squares form

    E = int_D gamma |grad v0|^2  +  int_{domain} gamma grad w . grad(v0 + u)

with w = v0 - u obtained from a dedicated solve on the holed mesh whose load
is supported on the cavity triangles only (w has zero boundary data).  The
reported identity residual |E - (term_D + term_diff)| then measures exactly
the discrete orthogonality of the nested spaces, which is the property the
nesting construction is supposed to deliver.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .geometry import EdgeTag, NestedMeshPair, TriMesh
from .probe import BoundaryData, GammaField


class SolverError(RuntimeError):
    """Assembly or solve failure."""


# ---------------------------------------------------------------------------
# assembly


@dataclass
class StiffnessSystem:
    """Assembled, factorized stiffness operator for one (mesh, gamma) pair.

    The interior block is factorized once and reused for every right-hand
    side; the factorization handle is read-only after construction and safe
    to share across threads issuing concurrent back-substitutions.
    """

    mesh: TriMesh
    gamma: GammaField
    dirichlet_nodes: np.ndarray
    interior_nodes: np.ndarray
    K: sp.csr_matrix
    K_id: sp.csr_matrix  # interior rows, Dirichlet columns
    grads: np.ndarray    # (nt, 3, 2) P1 shape gradients
    areas: np.ndarray
    gamma_c: np.ndarray  # gamma at element centroids
    _lu: object
    _interior_pos: np.ndarray

    def solve(self, dirichlet_values: np.ndarray, refine: int = 1) -> np.ndarray:
        """Nodal solution with the given values at self.dirichlet_nodes.

        Complex data is handled as two real solves.  One step of iterative
        refinement keeps the algebraic residual near machine precision, which
        the energy-gap identity depends on.
        """
        d = np.asarray(dirichlet_values)
        if d.shape != self.dirichlet_nodes.shape:
            raise SolverError("Dirichlet data must match the Dirichlet node list")
        if np.iscomplexobj(d):
            ur = self._solve_real(d.real, refine)
            ui = self._solve_real(d.imag, refine)
            return ur + 1j * ui
        return self._solve_real(d.astype(float), refine)

    def _solve_real(self, d, refine):
        rhs = -self.K_id @ d
        x = self._lu.solve(rhs)
        kii = self.K[self.interior_nodes][:, self.interior_nodes]
        for _ in range(refine):
            r = rhs - kii @ x
            x = x + self._lu.solve(r)
        u = np.zeros(self.mesh.n_vertices)
        u[self.dirichlet_nodes] = d
        u[self.interior_nodes] = x
        return u

    def solve_load(self, load: np.ndarray, refine: int = 1) -> np.ndarray:
        """Solution with zero Dirichlet data and the given nodal load vector."""
        if np.iscomplexobj(load):
            return self.solve_load(load.real, refine) + 1j * self.solve_load(load.imag, refine)
        rhs = load[self.interior_nodes]
        x = self._lu.solve(rhs)
        kii = self.K[self.interior_nodes][:, self.interior_nodes]
        for _ in range(refine):
            r = rhs - kii @ x
            x = x + self._lu.solve(r)
        u = np.zeros(self.mesh.n_vertices)
        u[self.interior_nodes] = x
        return u

    def residual(self, u: np.ndarray, dirichlet_values: np.ndarray) -> float:
        """Relative residual of the interior equations."""
        if np.iscomplexobj(u):
            return max(self.residual(u.real, dirichlet_values.real),
                       self.residual(u.imag, dirichlet_values.imag))
        r = (self.K @ u)[self.interior_nodes]
        scale = float(np.abs(self.K).sum(axis=1).max() * max(np.abs(u).max(), 1e-300))
        return float(np.linalg.norm(r, np.inf) / scale)

    # -- element-wise energy machinery

    def element_gradients(self, u: np.ndarray) -> np.ndarray:
        """(nt, 2) per-element gradient of a nodal field."""
        ut = u[self.mesh.triangles]
        return np.einsum("tk,tkd->td", ut, self.grads)

    def energy(self, u: np.ndarray, triangles: np.ndarray | None = None) -> float:
        """int gamma |grad u|^2 over all elements or the given element subset."""
        g = self.element_gradients(u)
        w = self.gamma_c * self.areas
        dens = (np.abs(g) ** 2).sum(axis=1) * w
        if triangles is not None:
            dens = dens[triangles]
        return float(dens.sum())

    def energy_pairing(self, u: np.ndarray, v: np.ndarray,
                       triangles: np.ndarray | None = None) -> float:
        """int gamma grad u . grad v (real bilinear, complex fields by parts)."""
        if np.iscomplexobj(u) or np.iscomplexobj(v):
            u = np.asarray(u, dtype=complex)
            v = np.asarray(v, dtype=complex)
            return (self.energy_pairing(u.real, v.real, triangles)
                    + self.energy_pairing(u.imag, v.imag, triangles))
        gu = self.element_gradients(u)
        gv = self.element_gradients(v)
        w = self.gamma_c * self.areas
        dens = (gu * gv).sum(axis=1) * w
        if triangles is not None:
            dens = dens[triangles]
        return float(dens.sum())



def _element_geometry(mesh: TriMesh):
    p = mesh.vertices[mesh.triangles]
    v1 = p[:, 1] - p[:, 0]
    v2 = p[:, 2] - p[:, 0]
    area2 = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
    if np.any(area2 <= 0):
        raise SolverError("mesh has non-positive triangle areas")
    areas = 0.5 * area2
    # grad(hat_k) = perpendicular of the opposite edge / (2 area)
    grads = np.empty((len(areas), 3, 2))
    for k in range(3):
        e = p[:, (k + 2) % 3] - p[:, (k + 1) % 3]
        grads[:, k, 0] = -e[:, 1]
        grads[:, k, 1] = e[:, 0]
    grads /= area2[:, None, None]
    return grads, areas


def assemble(mesh: TriMesh, gamma: GammaField) -> StiffnessSystem:
    """Assemble and factorize the stiffness system K_ij = int gamma grad(hat_i).grad(hat_j).

    gamma is evaluated at element centroids (one-point quadrature, consistent
    with P1 accuracy).  The Dirichlet set is the outer boundary: slab faces
    plus lateral truncation; cavity edges stay natural.
    """
    grads, areas = _element_geometry(mesh)
    centroids = mesh.vertices[mesh.triangles].mean(axis=1)
    gamma_c = gamma.value(centroids)
    if np.any(gamma_c <= 0):
        raise SolverError("mesh or gamma invalid: nonpositive conductivity at a centroid")

    w = gamma_c * areas
    blocks = np.einsum("tkd,tld->tkl", grads, grads) * w[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1).reshape(-1)
    cols = np.tile(mesh.triangles, (1, 3)).reshape(-1)
    K = sp.coo_matrix(
        (blocks.reshape(-1), (rows, cols)),
        shape=(mesh.n_vertices, mesh.n_vertices),
    ).tocsr()

    dirichlet = mesh.boundary_nodes(EdgeTag.SLAB_TOP, EdgeTag.SLAB_BOTTOM, EdgeTag.LATERAL)
    interior = np.setdiff1d(np.arange(mesh.n_vertices), dirichlet)
    kii = K[interior][:, interior].tocsc()
    kid = K[interior][:, dirichlet].tocsr()

    try:
        lu = splu(kii)
    except RuntimeError as exc:
        raise SolverError(f"mesh or gamma invalid: factorization failed ({exc})") from exc

    asym = abs(K - K.T).max()
    scale = abs(K).max()
    if asym > 1e-13 * scale:
        raise SolverError("mesh or gamma invalid: stiffness matrix not symmetric")
    rng = np.random.default_rng(0)
    for _ in range(3):
        z = rng.standard_normal(len(interior))
        if z @ (kii @ z) <= 0:
            raise SolverError("mesh or gamma invalid: interior block not positive definite")

    pos = np.empty(mesh.n_vertices, dtype=np.int64)
    pos[interior] = np.arange(len(interior))
    return StiffnessSystem(mesh, gamma, dirichlet, interior, K, kid, grads, areas,
                           gamma_c, lu, pos)


# ---------------------------------------------------------------------------
# public operations


@dataclass(frozen=True)
class FieldSolution:
    """Nodal solution (complex stored as one complex vector) plus its data record."""

    mesh: TriMesh
    values: np.ndarray
    dirichlet_nodes: np.ndarray
    dirichlet_values: np.ndarray
    residual: float


def solve_dirichlet(system: StiffnessSystem, data: BoundaryData | np.ndarray) -> FieldSolution:
    """Solve with prescribed outer-boundary data; residual is recorded."""
    if isinstance(data, BoundaryData):
        if not np.array_equal(data.node_indices, system.dirichlet_nodes):
            raise SolverError("boundary data nodes do not match the system's Dirichlet set")
        values = data.values
    else:
        values = np.asarray(data)
    u = system.solve(values)
    res = system.residual(u, np.asarray(values, dtype=complex))
    return FieldSolution(system.mesh, u, system.dirichlet_nodes, np.asarray(values), res)


def dirichlet_energy(system: StiffnessSystem, field: FieldSolution | np.ndarray) -> float:
    """int gamma |grad u|^2 for a nodal field on the system's mesh."""
    u = field.values if isinstance(field, FieldSolution) else np.asarray(field)
    if len(u) != system.mesh.n_vertices:
        raise SolverError("field does not match the system's mesh")
    return system.energy(u)


def dtn_pairing(system: StiffnessSystem, f: np.ndarray, g: np.ndarray) -> float:
    """Boundary pairing <current(f), g> evaluated as a domain energy form."""
    uf = system.solve(np.asarray(f))
    ug = system.solve(np.asarray(g))
    return system.energy_pairing(uf, ug)


@dataclass(frozen=True)
class EnergyGapResult:
    """Energy gap E plus its two-route decomposition and diagnostics.

    E is the difference of the cavity-free and cavity Dirichlet energies,
    evaluated in difference-of-squares form; term_D and term_diff are the
    two domain integrals whose sum equals E in exact arithmetic; the
    identity residual is |E - (term_D + term_diff)| / max(E, floor).
    """

    E: float
    e_full: float
    e_holed: float
    term_D: float
    term_diff: float
    identity_residual: float


class FactorizationCache:
    """(mesh hash, gamma hash) -> StiffnessSystem, built once per pair."""

    def __init__(self):
        self._store = {}
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(mesh: TriMesh, gamma: GammaField):
        gh = hashlib.sha256(gamma.canonical().encode()).hexdigest()
        return (mesh.content_hash(), gh)

    def get(self, mesh: TriMesh, gamma: GammaField) -> StiffnessSystem:
        k = self.key(mesh, gamma)
        if k not in self._store:
            self.misses += 1
            self._store[k] = assemble(mesh, gamma)
        else:
            self.hits += 1
        return self._store[k]


_default_cache = FactorizationCache()


def energy_gap(pair: NestedMeshPair, gamma: GammaField, data: BoundaryData | np.ndarray,
               cache: FactorizationCache | None = None) -> EnergyGapResult:
    """Energy gap of one Dirichlet datum between the full and holed meshes.

    The same data drives both solves (the meshes share all outer-boundary
    nodes by construction).  Complex data contributes the sum of the real
    and imaginary parts' gaps.
    """
    cache = cache or _default_cache
    sys_full = cache.get(pair.full, gamma)
    values = data.values if isinstance(data, BoundaryData) else np.asarray(data)
    if isinstance(data, BoundaryData) and not np.array_equal(data.node_indices,
                                                             sys_full.dirichlet_nodes):
        raise SolverError("boundary data nodes do not match the mesh boundary")

    if len(pair.hole_triangles) == 0:
        # no cavity: identical mesh, identical system, gap vanishes identically
        v0 = sys_full.solve(np.asarray(values, dtype=complex))
        e = sys_full.energy(v0)
        return EnergyGapResult(0.0, e, e, 0.0, 0.0, 0.0)

    sys_holed = cache.get(pair.holed, gamma)
    n_holed = sys_holed.mesh.n_vertices
    if sys_full.mesh.n_vertices < n_holed or not np.array_equal(
            sys_full.mesh.vertices[:n_holed], sys_holed.mesh.vertices):
        raise SolverError("meshes not nested: holed vertices are not a prefix of full")

    hole_tris = pair.full.triangles[pair.hole_triangles]
    hole_grads, hole_areas = _element_geometry_for(pair.full, pair.hole_triangles)
    hole_gamma = gamma.value(pair.full.vertices[hole_tris].mean(axis=1))
    hole_w = hole_gamma * hole_areas

    E = 0.0
    e_full = 0.0
    e_holed = 0.0
    term_D = 0.0
    term_diff = 0.0
    vals = np.asarray(values, dtype=complex)
    for part in (vals.real, vals.imag):
        v0 = sys_full.solve(part)
        # load of the holed problem for w = v0 - u: supported on the cavity
        # triangles; contributions to interior-hole hat functions (absent
        # from the holed space) are dropped by the slice
        gv0_hole = np.einsum("tk,tkd->td", v0[hole_tris], hole_grads)
        contrib = -np.einsum("td,tkd->tk", gv0_hole, hole_grads) * hole_w[:, None]
        load_full = np.zeros(sys_full.mesh.n_vertices)
        np.add.at(load_full, hole_tris.ravel(), contrib.ravel())
        w = sys_holed.solve_load(load_full[:n_holed])

        v0h = v0[:n_holed]
        u_d = v0h - w

        gw = sys_holed.element_gradients(w)
        gv0 = sys_holed.element_gradients(v0h)
        gud = sys_holed.element_gradients(u_d)
        wgt = sys_holed.gamma_c * sys_holed.areas

        t_d = float(((gv0_hole**2).sum(axis=1) * hole_w).sum())
        t_diff = float(((gw * gw).sum(axis=1) * wgt).sum())
        cross = float(((gw * (gv0 + gud)).sum(axis=1) * wgt).sum())

        term_D += t_d
        term_diff += t_diff
        E += t_d + cross
        e_full += sys_full.energy(v0)
        e_holed += float(((gud * gud).sum(axis=1) * wgt).sum())

    resid = abs(E - (term_D + term_diff)) / max(abs(E), 1e-300)
    return EnergyGapResult(E, e_full, e_holed, term_D, term_diff, resid)


def _element_geometry_for(mesh: TriMesh, tri_rows: np.ndarray):
    sub = TriMesh(mesh.vertices, mesh.triangles[tri_rows], mesh.boundary_edges,
                  mesh.boundary_tags, mesh.edge_target)
    return _element_geometry(sub)


# ---------------------------------------------------------------------------
# scene: meshes + factorizations built once, shared by every (t, h) solve


class Scene:
    """Everything reusable across a probing run on one geometry.

    Holds the nested mesh pair, the conductivity and both factorized
    systems; immutable after construction, safe to share across workers.
    """

    def __init__(self, slab, cavity_polygon, gamma: GammaField, target_edge: float,
                 min_angle_deg: float = 20.0, jitter: float = 0.0, seed: int = 0,
                 cache: FactorizationCache | None = None):
        from .geometry import build_nested_meshes

        self.slab = slab
        self.gamma = gamma
        self.cache = cache or FactorizationCache()
        self.pair = build_nested_meshes(slab, cavity_polygon, target_edge,
                                        min_angle_deg=min_angle_deg,
                                        jitter=jitter, seed=seed)
        self.system_full = self.cache.get(self.pair.full, gamma)
        if len(self.pair.hole_triangles):
            self.system_holed = self.cache.get(self.pair.holed, gamma)
        else:
            self.system_holed = self.system_full
        self.target_edge = target_edge

    @property
    def has_cavity(self) -> bool:
        return len(self.pair.hole_triangles) > 0

    def energy_gap(self, data) -> EnergyGapResult:
        return energy_gap(self.pair, self.gamma, data, cache=self.cache)

    def mesh_stats(self) -> dict:
        holed = self.pair.holed
        return {
            "n_vertices": int(holed.n_vertices),
            "n_triangles_holed": int(holed.n_triangles),
            "n_triangles_full": int(self.pair.full.n_triangles),
            "min_angle_deg": float(holed.min_angle_deg()),
            "target_edge": float(self.target_edge),
            "halfwidth": float(self.slab.halfwidth),
        }
