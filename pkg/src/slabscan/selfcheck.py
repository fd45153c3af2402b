"""Built-in property checks behind the `validate` command.

These re-run the structural identities the method relies on (null phase
pair, amplitude transport, probe harmonicity, manufactured-solution
convergence, the discrete energy-gap identity, and synthetic slope
recovery) on the configured scene, so a user can test an installation or a
custom configuration in one shot.
"""

from __future__ import annotations

import numpy as np

from .config import RunConfig
from .geometry import SlabGeometry, snap_halfwidth
from .indicator import IndicatorSeries, SeriesEntry, fit_slope
from .probe import (
    GammaField,
    ProbeParams,
    boundary_data,
    eikonal_residuals,
    residual_diagnostic,
    transport_residual,
)
from .solver import Scene, dirichlet_energy, solve_dirichlet


def _sample_points(rng, n, box, p, axis, min_axis_dist=0.05, min_center_dist=0.3):
    """Random points in a box, clear of the probe center and its axis line."""
    (x0, x1), (y0, y1) = box
    pts = []
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    while len(pts) < n:
        q = np.array([rng.uniform(x0, x1), rng.uniform(y0, y1)])
        d = q - np.asarray(p, dtype=float)
        r = np.hypot(*d)
        if r < min_center_dist:
            continue
        perp = abs(d[0] * a[1] - d[1] * a[0])
        if perp < min_axis_dist:
            continue
        pts.append(q)
    return np.asarray(pts)


def check_eikonal(n_points=1000, seed=0):
    rng = np.random.default_rng(seed)
    p = (0.3, 2.5)
    pts = _sample_points(rng, n_points, ((-2, 2), (0, 1)), p, (1, 0))
    q1, q2 = eikonal_residuals(pts, p, (1.0, 0.0))
    worst = max(float(np.abs(q1).max()), float(np.abs(q2).max()))
    return worst < 1e-8, f"max identity residual {worst:.2e}"


def check_transport(seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in (2, 3, 4):
        p = np.zeros(n)
        p[-1] = 2.5
        axis = np.zeros(n)
        axis[0] = 1.0
        pts = rng.uniform(-1.0, 1.0, size=(200, n))
        pts[:, -1] = rng.uniform(0.0, 1.0, size=200)
        d = pts - p
        x1 = d @ axis
        r_perp = np.sqrt(np.maximum((d * d).sum(axis=1) - x1**2, 0.0))
        keep = r_perp > 0.3
        res = transport_residual(pts[keep], p, n, axis)
        worst = max(worst, float(res.max()))
    return worst < 1e-6, f"max transport residual {worst:.2e}"


def check_harmonicity():
    slab = SlabGeometry(0.0, 1.0, 3.0)
    p = (0.0, 2.5)
    params = ProbeParams(p=p, t=1.0, h=1.0 / 3.0, delta=0.1)
    rng = np.random.default_rng(1)
    pts = _sample_points(rng, 200, ((-1.5, 1.5), (0.05, 0.95)), p, (1, 0),
                         min_axis_dist=0.1, min_center_dist=1.3)
    res = residual_diagnostic(params, GammaField(), pts, step=0.01)
    return res < 1e-6, f"max normalized PDE residual {res:.2e}"


def check_convergence():
    gamma = GammaField()
    errs = []
    for edge in (0.08, 0.04, 0.02):
        slab = SlabGeometry(0.0, 1.0, snap_halfwidth(1.0, edge))
        scene = Scene(slab, None, gamma, edge)
        mesh = scene.pair.full
        exact = lambda q: q[:, 0] ** 3 - 3 * q[:, 0] * q[:, 1] ** 2
        nodes = scene.system_full.dirichlet_nodes
        data = exact(mesh.vertices[nodes])
        sol = solve_dirichlet(scene.system_full, data)
        errs.append(_l2_error(mesh, sol.values.real, exact))
    r1 = errs[0] / errs[1]
    r2 = errs[1] / errs[2]
    ok = all(3.2 <= r <= 4.8 for r in (r1, r2))
    return ok, f"L2 error ratios per halving: {r1:.2f}, {r2:.2f}"


def _l2_error(mesh, u, exact):
    # 3-point edge-midpoint rule, degree-2 exact, enough to measure order
    tri = mesh.triangles
    p = mesh.vertices[tri]
    mids = 0.5 * (p + np.roll(p, -1, axis=1))
    areas = 0.5 * np.abs(
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1])
    )
    u_mid = 0.5 * (u[tri] + np.roll(u[tri], -1, axis=1))
    err2 = 0.0
    for k in range(3):
        diff = u_mid[:, k] - exact(mids[:, k, :])
        err2 += (areas / 3.0) * diff**2
    return float(np.sqrt(err2.sum()))


def check_energy_gap_identity(cfg: RunConfig):
    if cfg.cavity is None:
        return True, "no cavity configured; gap is identically zero"
    scene = cfg.build_scene()
    t = 0.5 * (float(cfg.sweep["t_lo"]) + float(cfg.sweep["t_hi"]))
    worst = 0.0
    for h in cfg.grid.h_values[:: max(1, len(cfg.grid.h_values) // 3)]:
        params = ProbeParams(p=tuple(cfg.probes.points[0]), t=t, h=float(h),
                             delta=cfg.delta_for(t), axis=tuple(cfg.probes.axes[0]))
        data = boundary_data(scene.pair.full, params, scene.gamma,
                             localized=cfg.localized, slab=scene.slab)
        res = scene.energy_gap(data)
        worst = max(worst, res.identity_residual)
        if res.E < -1e-12 * res.e_full:
            return False, f"negative gap E={res.E!r}"
    return worst <= 1e-10, f"max identity residual {worst:.2e}"


def check_synthetic_slopes():
    inv_h = np.arange(3.0, 11.0)
    for target_slope, target_icpt in ((np.log(0.3), 0.0), (np.log(2.0), np.log(5.0))):
        E = np.exp(target_icpt + target_slope * inv_h)
        entries = tuple(SeriesEntry(1 / x, x, e, 0.0, 0.0, 1.0)
                        for x, e in zip(inv_h, E))
        s = IndicatorSeries(0, (0, 0), 1.0, True, entries, False)
        f = fit_slope(s)
        if abs(f.slope - target_slope) > 1e-12 or abs(f.intercept - target_icpt) > 1e-11:
            return False, f"planted slope {target_slope:.4f} got {f.slope:.4f}"
    return True, "planted exponentials recovered to 1e-12"


def run_selfchecks(cfg: RunConfig):
    checks = [
        ("phase pair null identities", check_eikonal),
        ("amplitude transport identity", check_transport),
        ("probe harmonicity (gamma=1, n=2)", check_harmonicity),
        ("forward solver convergence", check_convergence),
        ("energy-gap identity", lambda: check_energy_gap_identity(cfg)),
        ("synthetic slope recovery", check_synthetic_slopes),
    ]
    results = []
    for name, fn in checks:
        try:
            passed, detail = fn()
        except Exception as exc:  # noqa: BLE001 - report as failure
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append((name, passed, detail))
    return results
