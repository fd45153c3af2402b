"""Complex spherical wave boundary data and structural diagnostics.

A probe is the leading-order wave

    v(x) = (t / |x - p|)^(1/h) * exp(-i psi / h) * gamma(x)^(-1/2) * a(x)

centered at a point p outside the slab, with unit magnitude on the probing
front |x - p| = t.  The radial log-phase pair (log|x - p|, psi) satisfies
the null eikonal identities and the transversal amplitude a satisfies the
first transport equation; both are checked numerically by the diagnostics
here rather than assumed.

Field values are carried as (log-magnitude, phase) pairs because the radial
factor spans hundreds of orders of magnitude across the domain; they are
exponentiated (with a hard cap) only when boundary data is materialized for
the solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import EdgeTag, SlabGeometry, TriMesh


class ProbeError(ValueError):
    """Invalid probe configuration."""


# ---------------------------------------------------------------------------
# semiclassical grid


@dataclass(frozen=True)
class HGrid:
    """Admissible semiclassical values h = (k + n + delta_S + 1/2)^(-1)."""

    n: int
    delta_S: float
    k_values: tuple

    @property
    def h_values(self) -> np.ndarray:
        k = np.asarray(self.k_values, dtype=float)
        return 1.0 / (k + self.n + self.delta_S + 0.5)

    @property
    def inv_h_values(self) -> np.ndarray:
        k = np.asarray(self.k_values, dtype=float)
        return k + self.n + self.delta_S + 0.5

    def contains(self, h: float, tol: float = 1e-9) -> bool:
        k = 1.0 / h - self.n - self.delta_S - 0.5
        return k > -tol and abs(k - round(k)) < tol

    def subset(self, k_min: int, k_max: int) -> "HGrid":
        ks = tuple(k for k in self.k_values if k_min <= k <= k_max)
        return HGrid(self.n, self.delta_S, ks)


def h_grid(n: int, delta_S: float, k_max: int) -> HGrid:
    """Admissible grid for k = 0..k_max; 1/h values are unit-spaced."""
    if delta_S <= 0:
        raise ProbeError("delta_S must be positive")
    if k_max < 0:
        raise ProbeError("k_max must be >= 0")
    return HGrid(n, delta_S, tuple(range(k_max + 1)))


# ---------------------------------------------------------------------------
# conductivity field


@dataclass(frozen=True)
class GammaBump:
    center: tuple
    radius: float
    amplitude: float


@dataclass(frozen=True)
class GammaField:
    """Conductivity gamma = 1 + sum of compactly supported smooth radial bumps.

    Each bump is amplitude * exp(1 - 1/(1 - s^2)) with s = |x - c| / radius,
    so gamma is smooth, equals 1 outside every bump, and its gradient and
    Laplacian are available analytically.  All bumps must sit inside the ball
    of radius `R` around the origin, outside of which gamma is identically 1.
    """

    bumps: tuple = field(default_factory=tuple)
    R: float = 1.0

    def __post_init__(self):
        amp_min = sum(min(0.0, b.amplitude) for b in self.bumps)
        if 1.0 + amp_min <= 0.0:
            raise ProbeError("gamma must stay positive; negative bump amplitudes too large")
        for b in self.bumps:
            if b.radius <= 0:
                raise ProbeError("bump radius must be positive")
            if math.hypot(*b.center) + b.radius > self.R + 1e-12:
                raise ProbeError("bump support must lie inside the declared ball of radius R")

    @property
    def is_unit(self) -> bool:
        return len(self.bumps) == 0

    def value(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        g = np.ones(len(pts))
        for b in self.bumps:
            s2 = ((pts[:, 0] - b.center[0]) ** 2 + (pts[:, 1] - b.center[1]) ** 2) / b.radius**2
            g = g + b.amplitude * _bump(s2)
        return g

    def gradient(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros_like(pts)
        for b in self.bumps:
            d = pts - np.asarray(b.center)
            s2 = (d * d).sum(axis=1) / b.radius**2
            # f'(rho)/rho = amplitude * (b'(s)/s) / radius^2, smooth at rho=0
            out += (b.amplitude * _bump_ds_over_s(s2) / b.radius**2)[:, None] * d
        return out

    def laplacian(self, points) -> np.ndarray:
        # radial function in the plane: lap f = f''(rho) + f'(rho)/rho
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(pts))
        for b in self.bumps:
            d = pts - np.asarray(b.center)
            s2 = (d * d).sum(axis=1) / b.radius**2
            out += b.amplitude * (_bump_d2(s2) + _bump_ds_over_s(s2)) / b.radius**2
        return out

    def canonical(self) -> str:
        parts = [f"R={self.R!r}"]
        for b in self.bumps:
            parts.append(f"({b.center[0]!r},{b.center[1]!r},{b.radius!r},{b.amplitude!r})")
        return ";".join(parts)


def _bump(s2):
    out = np.zeros_like(s2)
    m = s2 < 1.0
    out[m] = np.exp(1.0 - 1.0 / (1.0 - s2[m]))
    return out


def _bump_ds_over_s(s2):
    # (d/ds b)(s) / s = -2 b(s) / (1 - s^2)^2
    out = np.zeros_like(s2)
    m = s2 < 1.0
    om = 1.0 - s2[m]
    out[m] = -2.0 * np.exp(1.0 - 1.0 / om) / om**2
    return out


def _bump_d2(s2):
    # b''(s) = b(s) * (g'^2 + g''),  g = 1 - 1/(1-s^2)
    out = np.zeros_like(s2)
    m = s2 < 1.0
    s2m = s2[m]
    om = 1.0 - s2m
    gp2 = 4.0 * s2m / om**4
    gpp = -2.0 / om**2 - 8.0 * s2m / om**3
    out[m] = np.exp(1.0 - 1.0 / om) * (gp2 + gpp)
    return out


# ---------------------------------------------------------------------------
# probe parameters and fields


@dataclass(frozen=True)
class LogComplex:
    """Complex values stored as (natural-log magnitude, phase in radians)."""

    logmag: np.ndarray
    phase: np.ndarray

    def to_complex(self, cap: float = 700.0):
        """Materialize, clamping log-magnitudes at +-cap.

        Returns (values, n_clamped); a nonzero count flags an overflow-guard
        event that callers should surface as a warning.
        """
        lm = np.asarray(self.logmag, dtype=float)
        clamped = int(np.count_nonzero(np.abs(lm) > cap))
        lm = np.clip(lm, -cap, cap)
        return np.exp(lm) * np.exp(1j * np.asarray(self.phase)), clamped


@dataclass(frozen=True)
class ProbeParams:
    """One complex spherical wave: center p, front radius t, parameter h,
    cutoff width delta and reference axis for the angular phase.

    The axis is tangent to the slab faces by default (unit x direction), so
    the half-lines where the angular distance is 0 or pi, and where the
    transversal amplitude degenerates in dimension >= 3, stay outside the
    slab for any p above or below it.
    """

    p: tuple
    t: float
    h: float
    delta: float
    axis: tuple = (1.0, 0.0)
    n: int = 2

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float)
        norm = float(np.linalg.norm(a))
        if norm == 0:
            raise ProbeError("axis must be a nonzero vector")
        object.__setattr__(self, "axis", tuple(a / norm))
        if not (0 < self.h < 1):
            raise ProbeError("h must lie in (0, 1)")
        if self.t <= 0:
            raise ProbeError("front radius t must be positive")
        if self.delta <= 0:
            raise ProbeError("cutoff width delta must be positive")

    @property
    def inv_h(self) -> float:
        return 1.0 / self.h


def validate_probe(params: ProbeParams, slab: SlabGeometry, grid: HGrid | None = None,
                   strict: bool = True):
    """Cross-field checks against the slab: p outside the strip, the front
    meaningful, the axis line clear of the strip, and h on the admissible
    grid when strict."""
    p = np.asarray(params.p, dtype=float)
    gap = slab.strip_distance(p)
    if gap <= 0:
        raise ProbeError(f"probe center {tuple(p)} must lie strictly outside the slab strip")
    if params.t + params.delta >= gap + slab.thickness:
        raise ProbeError("t + delta must stay below dist(p, slab) + slab thickness")
    ax = np.asarray(params.axis, dtype=float)
    if abs(ax[1]) > 1e-12:
        # the axis line hits the strip at |s| = |(d - p_y)/ax_y|; it must miss
        # the truncation rectangle where the phase is singular
        for d in (slab.d1, slab.d2):
            s = (d - p[1]) / ax[1]
            x_hit = p[0] + s * ax[0]
            if abs(x_hit) <= slab.halfwidth:
                raise ProbeError("axis line crosses the domain; use a slab-tangent axis")
    if strict and grid is not None and not grid.contains(params.h):
        raise ProbeError(f"h={params.h} is not on the admissible grid")


def default_axis(p, slab: SlabGeometry) -> tuple:
    """Slab-tangent axis (unit x); valid for any p above or below the strip."""
    return (1.0, 0.0)


# ---------------------------------------------------------------------------
# phases and amplitude


def phase(x, p, axis):
    """Radial log magnitude and unsigned angular distance of x - p from axis.

    Returns (phi, psi) with phi = log|x - p| and psi in [0, pi] the geodesic
    angle on the unit sphere between (x - p)/|x - p| and the axis.  Works in
    any dimension; x may be a single point or an (..., n) array.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    a = _unit(np.asarray(axis, dtype=float))
    d = x - p
    r = np.sqrt((d * d).sum(axis=-1))
    if np.any(r == 0):
        raise ProbeError("singular point: x coincides with the probe center")
    cospsi = np.clip((d * a).sum(axis=-1) / r, -1.0, 1.0)
    return np.log(r), np.arccos(cospsi)


def phase_gradients(x, p, axis):
    """Analytic gradients (grad phi, grad psi); undefined on the axis line."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    a = _unit(np.asarray(axis, dtype=float))
    d = x - p
    r = np.sqrt((d * d).sum(axis=-1, keepdims=True))
    u = d / r
    cospsi = (u * a).sum(axis=-1, keepdims=True)
    sinpsi = np.sqrt(np.maximum(1.0 - cospsi**2, 0.0))
    if np.any(sinpsi < 1e-13):
        raise ProbeError("angular phase gradient undefined on the axis line")
    grad_phi = d / r**2
    grad_psi = (cospsi * u - a) / (r * sinpsi)
    return grad_phi, grad_psi


def rho_laplacian(x, p, axis, n: int):
    """Analytic Laplacian of phi + i psi in dimension n (vanishes for n=2)."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    a = _unit(np.asarray(axis, dtype=float))
    d = x - p
    r2 = (d * d).sum(axis=-1)
    x1 = (d * a).sum(axis=-1)
    r_perp = np.sqrt(np.maximum(r2 - x1**2, 0.0))
    if n >= 3 and np.any(r_perp < 1e-13):
        raise ProbeError("Laplacian undefined on the axis line")
    lap_phi = (n - 2) / r2
    with np.errstate(divide="ignore", invalid="ignore"):
        lap_psi = np.where(n == 2, 0.0, (n - 2) * x1 / (r_perp * r2))
    return lap_phi + 1j * lap_psi


def amplitude(x, p, n: int, axis=(1.0, 0.0)) -> LogComplex:
    """Transversal amplitude (2i r_perp)^((2-n)/2), principal branch.

    r_perp is the distance from x - p to the axis line; for n = 2 the
    amplitude is identically 1.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    a = _unit(np.asarray(axis, dtype=float))
    d = x - p
    r2 = (d * d).sum(axis=-1)
    x1 = (d * a).sum(axis=-1)
    r_perp = np.sqrt(np.maximum(r2 - x1**2, 0.0))
    ex = 0.5 * (2 - n)
    if n == 2:
        z = np.zeros(np.shape(r_perp))
        return LogComplex(z, z.copy())
    if np.any(r_perp == 0):
        raise ProbeError("amplitude undefined on the axis line for n >= 3")
    return LogComplex(ex * np.log(2.0 * r_perp), np.full(np.shape(r_perp), ex * (np.pi / 2)))


def amplitude_complex(x, p, n: int, axis=(1.0, 0.0)) -> np.ndarray:
    lc = amplitude(x, p, n, axis)
    vals, _ = lc.to_complex(cap=1e308)
    return vals


def probe_value(x, params: ProbeParams, gamma: GammaField) -> LogComplex:
    """Leading-order probe field at x, as a (logmag, phase) pair.

    logmag = (log t - log|x-p|)/h - log(gamma)/2 + logmag(a)
    phase  = -psi/h + phase(a)
    """
    phi, psi = phase(x, params.p, params.axis)
    amp = amplitude(x, params.p, params.n, params.axis)
    logmag = (math.log(params.t) - phi) / params.h + amp.logmag
    if not gamma.is_unit:
        pts = np.asarray(x, dtype=float)
        g = gamma.value(pts.reshape(-1, pts.shape[-1])).reshape(np.shape(phi))
        logmag = logmag - 0.5 * np.log(g)
    return LogComplex(logmag, -psi / params.h + amp.phase)


def cutoff(x, params: ProbeParams) -> np.ndarray:
    """Smooth radial cutoff: 1 inside |x-p| <= t + delta/2, 0 outside t + delta.

    The transition uses the standard exp(-1/s) blend, so all derivatives
    vanish at both ends of the band.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(params.p, dtype=float)
    d = x - p
    r = np.sqrt((d * d).sum(axis=-1))
    lo = params.t + 0.5 * params.delta
    hi = params.t + params.delta
    s = np.clip((hi - r) / (hi - lo), 0.0, 1.0)
    return _smoothstep(s)


def _smoothstep(s):
    # C-infinity monotone step: 0 at s=0, 1 at s=1
    s = np.asarray(s, dtype=float)
    a = np.zeros_like(s)
    b = np.zeros_like(s)
    m = s > 0
    a[m] = np.exp(-1.0 / s[m])
    m1 = s < 1
    b[m1] = np.exp(-1.0 / (1.0 - s[m1]))
    return a / (a + b)


def _unit(v):
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# boundary data


@dataclass(frozen=True)
class BoundaryData:
    """Complex Dirichlet data sampled at the outer-boundary nodes of a mesh."""

    node_indices: np.ndarray
    values: np.ndarray
    lateral_leak: float
    n_clamped: int
    localized: bool


def boundary_data(mesh: TriMesh, params: ProbeParams, gamma: GammaField,
                  localized: bool, slab: SlabGeometry | None = None,
                  cap: float = 700.0) -> BoundaryData:
    """Probe Dirichlet data at all SLAB_TOP / SLAB_BOTTOM / LATERAL nodes.

    localized=True multiplies by the radial cutoff; the support ball must
    then stay clear of the lateral truncation faces (the data there are
    exactly zero), otherwise the truncation is too narrow and an error asks
    for a larger halfwidth.
    """
    nodes = mesh.boundary_nodes(EdgeTag.SLAB_TOP, EdgeTag.SLAB_BOTTOM, EdgeTag.LATERAL)
    pts = mesh.vertices[nodes]
    field_lc = probe_value(pts, params, gamma)
    values, clamped = field_lc.to_complex(cap)

    lateral_nodes = mesh.boundary_nodes(EdgeTag.LATERAL)
    lateral_mask = np.isin(nodes, lateral_nodes)

    if localized:
        if slab is not None:
            reach = params.t + params.delta
            if reach >= slab.halfwidth - abs(params.p[0]):
                raise ProbeError("cutoff support reaches the lateral faces; increase halfwidth")
        chi = cutoff(pts, params)
        values = values * chi
    leak = float(np.max(np.abs(values[lateral_mask]))) if lateral_mask.any() else 0.0
    return BoundaryData(nodes, values, leak, clamped, localized)


def remainder_boundary_data(mesh: TriMesh, params: ProbeParams, gamma: GammaField,
                            cap: float = 700.0) -> BoundaryData:
    """Complementary data (1 - cutoff) * probe: what localization discards."""
    nodes = mesh.boundary_nodes(EdgeTag.SLAB_TOP, EdgeTag.SLAB_BOTTOM, EdgeTag.LATERAL)
    pts = mesh.vertices[nodes]
    values, clamped = probe_value(pts, params, gamma).to_complex(cap)
    chi = cutoff(pts, params)
    values = values * (1.0 - chi)
    if np.max(np.abs(values)) == 0.0:
        raise ProbeError("cutoff support covers the whole boundary; remainder data vanish")
    lateral_nodes = mesh.boundary_nodes(EdgeTag.LATERAL)
    lateral_mask = np.isin(nodes, lateral_nodes)
    leak = float(np.max(np.abs(values[lateral_mask]))) if lateral_mask.any() else 0.0
    return BoundaryData(nodes, values, leak, clamped, False)


# ---------------------------------------------------------------------------
# diagnostics


def probe_complex(x, params: ProbeParams, gamma: GammaField) -> np.ndarray:
    vals, _ = probe_value(x, params, gamma).to_complex(cap=1e308)
    return vals


def residual_diagnostic(params: ProbeParams, gamma: GammaField, sample_points,
                        step: float = 0.01) -> float:
    """Max over samples of |div(gamma grad v)| / |v| by 4th-order differences.

    Samples must stay away from the probe center and from the axis line
    (where the unsigned angular phase is not smooth) by a few stencil
    widths.  For gamma = 1 in dimension 2 the probe is exactly a power of
    the radial complex coordinate, so the returned value is pure
    finite-difference truncation.
    """
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))

    def v(q):
        return probe_complex(q, params, gamma)

    worst = 0.0
    e = step
    for q in pts:
        vx = _fd_three(v, q, 0, e)
        vy = _fd_three(v, q, 1, e)
        lap = vx[2] + vy[2]
        g = gamma.value(q[None, :])[0]
        gg = gamma.gradient(q[None, :])[0]
        lv = g * lap + gg[0] * vx[1] + gg[1] * vy[1]
        denom = abs(vx[0])
        worst = max(worst, abs(lv) / denom)
    return worst


def _fd_three(f, q, axis, e):
    """(value, 4th-order first derivative, 4th-order second derivative)."""
    shifts = np.zeros((5, len(q)))
    shifts[:, axis] = np.array([-2, -1, 0, 1, 2]) * e
    vals = f(q[None, :] + shifts)
    f_m2, f_m1, f_0, f_p1, f_p2 = vals
    d1 = (f_m2 - 8 * f_m1 + 8 * f_p1 - f_p2) / (12 * e)
    d2 = (-f_m2 + 16 * f_m1 - 30 * f_0 + 16 * f_p1 - f_p2) / (12 * e * e)
    return f_0, d1, d2


def write_diagnostics_csv(path, params: ProbeParams, gamma: GammaField,
                          sample_points, step: float = 0.01):
    """Per-sample probe diagnostics: x, y, logmag, phase, residual."""
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    field_lc = probe_value(pts, params, gamma)
    with open(path, "w") as f:
        f.write("x,y,logmag,phase,residual\n")
        for q, lm, ph in zip(pts, np.atleast_1d(field_lc.logmag),
                             np.atleast_1d(field_lc.phase)):
            res = residual_diagnostic(params, gamma, q[None, :], step)
            f.write(f"{float(q[0])!r},{float(q[1])!r},{float(lm)!r},"
                    f"{float(ph)!r},{float(res)!r}\n")


def eikonal_residuals(x, p, axis):
    """(|grad phi|^2 - |grad psi|^2, grad phi . grad psi) from analytic gradients."""
    gphi, gpsi = phase_gradients(x, p, axis)
    q1 = (gphi * gphi).sum(axis=-1) - (gpsi * gpsi).sum(axis=-1)
    q2 = (gphi * gpsi).sum(axis=-1)
    return q1, q2


def transport_residual(x, p, n: int, axis=(1.0, 0.0), step: float = 1e-4) -> np.ndarray:
    """|grad rho . grad a + (1/2) (lap rho) a| with finite-difference grad a.

    grad rho and lap rho are analytic; a is evaluated exactly and
    differentiated by central differences, so a nonzero residual would flag
    an inconsistency between the amplitude and the phase pair.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    gphi, gpsi = phase_gradients(pts, p, axis)
    grho = gphi + 1j * gpsi
    lap = rho_laplacian(pts, p, axis, n)
    a0 = amplitude_complex(pts, p, n, axis)

    grad_a = np.zeros(pts.shape, dtype=complex)
    for ax in range(pts.shape[1]):
        dq = np.zeros(pts.shape[1])
        dq[ax] = step
        grad_a[:, ax] = (amplitude_complex(pts + dq, p, n, axis)
                         - amplitude_complex(pts - dq, p, n, axis)) / (2 * step)
    t = (grho * grad_a).sum(axis=1) + 0.5 * lap * a0
    return np.abs(t)
