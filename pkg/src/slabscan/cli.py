"""Command-line pipeline: forward solves, indicator series, full sweeps and
the self-check suite.

All CSV output uses shortest round-trip float formatting and fixed row
ordering, so two runs of the same config produce byte-identical files
regardless of worker count.  Exit codes: 0 success, 1 config/validation
error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import indicator as ind
from . import reconstruct as rec
from .config import ConfigError, RunConfig, load_config
from .geometry import cavity_distance
from .probe import ProbeParams, boundary_data, validate_probe
from .solver import FactorizationCache, solve_dirichlet


def fmt(x) -> str:
    """Shortest round-trip decimal form of a float."""
    return repr(float(x))


def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(row) + "\n")


def _indicator_rows(run_id, series_list):
    rows = []
    for s in sorted(series_list, key=lambda s: (s.probe_id, s.t)):
        for e in s.entries:
            rows.append([
                run_id, str(s.probe_id), fmt(s.p[0]), fmt(s.p[1]), fmt(s.t),
                fmt(e.h), fmt(e.inv_h), fmt(e.E), fmt(e.identity_residual),
                fmt(e.lateral_leak), "1" if s.localized else "0",
            ])
    return rows


INDICATOR_HEADER = ["run_id", "probe_id", "p_x", "p_y", "t", "h", "inv_h", "E",
                    "identity_residual", "lateral_leak", "localized"]
SLOPE_HEADER = ["probe_id", "t", "slope", "intercept", "r2", "classification"]
DIST_HEADER = ["probe_id", "p_x", "p_y", "status", "d_hat", "n_bisections"]
BOUNDARY_HEADER = ["curve_id", "vertex_index", "x", "y"]


def _manifest(cfg: RunConfig, scene, timings, warnings, artifacts, out: Path):
    m = {
        "config_hash": cfg.config_hash(),
        "run_id": cfg.run_id,
        "mesh": scene.mesh_stats() if scene is not None else None,
        "timings_s": {k: round(v, 3) for k, v in timings.items()},
        "warnings": warnings,
        "artifacts": sorted(str(a) for a in artifacts),
    }
    path = out / "manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(m, f, indent=2, sort_keys=True)
    return path


def _probe_params(cfg: RunConfig, i: int, t: float, h: float) -> ProbeParams:
    return ProbeParams(p=tuple(cfg.probes.points[i]), t=t, h=h,
                       delta=cfg.delta_for(t), axis=tuple(cfg.probes.axes[i]))


# ---------------------------------------------------------------------------
# commands


def cmd_forward(cfg: RunConfig, probe_index: int, t: float, h: float, out: Path) -> int:
    timings = {}
    t0 = time.time()
    scene = cfg.build_scene()
    timings["scene"] = time.time() - t0

    params = _probe_params(cfg, probe_index, t, h)
    validate_probe(params, scene.slab, grid=cfg.grid, strict=False)
    data = boundary_data(scene.pair.full, params, scene.gamma,
                         localized=cfg.localized, slab=scene.slab,
                         cap=float(cfg.thresholds["overflow_cap"]))
    t0 = time.time()
    gap = scene.energy_gap(data)
    u_full = solve_dirichlet(scene.system_full, data)
    timings["solve"] = time.time() - t0

    artifacts = []
    for name, mesh, values in (
        ("solution_full.csv", scene.pair.full, u_full.values),
        ("solution_holed.csv", scene.pair.holed,
         u_full.values[: scene.pair.holed.n_vertices] if scene.has_cavity else u_full.values),
    ):
        rows = [[fmt(x), fmt(y), fmt(v.real), fmt(v.imag)]
                for (x, y), v in zip(mesh.vertices, values)]
        _write_csv(out / name, ["x", "y", "re", "im"], rows)
        artifacts.append(out / name)

    gap_path = out / "energy_gap.json"
    with open(gap_path, "w") as f:
        json.dump({
            "E": gap.E, "e_full": gap.e_full, "e_holed": gap.e_holed,
            "term_D": gap.term_D, "term_diff": gap.term_diff,
            "identity_residual": gap.identity_residual,
            "t": t, "h": h, "probe_index": probe_index,
        }, f, indent=2, sort_keys=True)
    artifacts.append(gap_path)
    warnings = []
    if data.n_clamped:
        warnings.append(f"overflow guard clamped {data.n_clamped} boundary values")
    _manifest(cfg, scene, timings, warnings, artifacts, out)
    print(f"E = {gap.E!r} (identity residual {gap.identity_residual:.3e})")
    return 0


def cmd_indicator(cfg: RunConfig, probe_index: int, t: float, out: Path) -> int:
    timings = {}
    t0 = time.time()
    scene = cfg.build_scene()
    timings["scene"] = time.time() - t0

    p = tuple(cfg.probes.points[probe_index])
    axis = tuple(cfg.probes.axes[probe_index])

    def make(h):
        return ProbeParams(p=p, t=t, h=h, delta=cfg.delta_for(t), axis=axis)

    t0 = time.time()
    series = ind.compute_series(scene, probe_index, make, cfg.grid,
                                localized=cfg.localized)
    timings["series"] = time.time() - t0

    rows = _indicator_rows(cfg.run_id, [series])
    _write_csv(out / "indicator.csv", INDICATOR_HEADER, rows)
    artifacts = [out / "indicator.csv"]

    slope_rows = []
    if series.dead:
        cls = ind.Classification(ind.OUTSIDE, 0.0)
        slope_rows.append([str(probe_index), fmt(t), "nan", "nan", "0.0", cls.kind])
    else:
        fit = ind.fit_slope(series, float(cfg.thresholds["positivity_floor_factor"]))
        cls = ind.classify(fit, float(cfg.thresholds["tau"]))
        slope_rows.append([str(probe_index), fmt(t), fmt(fit.slope), fmt(fit.intercept),
                           fmt(fit.r2), cls.kind])
    _write_csv(out / "slopes.csv", SLOPE_HEADER, slope_rows)
    artifacts.append(out / "slopes.csv")
    _manifest(cfg, scene, timings, [], artifacts, out)
    print(f"classification: {cls.kind} (confidence r2={cls.confidence:.4f})")
    return 0


def cmd_sweep(cfg: RunConfig, out: Path, workers: int | None = None) -> int:
    timings = {}
    warnings = []
    t0 = time.time()
    scene = cfg.build_scene()
    timings["scene"] = time.time() - t0

    t0 = time.time()
    dmap = rec.sweep(scene, cfg.probes, cfg.grid,
                     float(cfg.sweep["t_lo"]), float(cfg.sweep["t_hi"]),
                     tol=float(cfg.sweep["tol"]),
                     tau=float(cfg.thresholds["tau"]),
                     localized=cfg.localized, delta_rel=cfg.delta_rel,
                     workers=workers if workers is not None else cfg.workers)
    timings["sweep"] = time.time() - t0

    artifacts = []
    dist_rows = []
    all_series = []
    for r in dmap.records:
        dist_rows.append([str(r.probe_id), fmt(r.p[0]), fmt(r.p[1]), r.status,
                          fmt(r.d_hat) if r.status == rec.OK else "nan",
                          str(r.n_bisections)])
        if r.estimate is not None:
            all_series.extend(r.estimate.series)
    _write_csv(out / "distances.csv", DIST_HEADER, dist_rows)
    artifacts.append(out / "distances.csv")
    _write_csv(out / "indicator.csv", INDICATOR_HEADER,
               _indicator_rows(cfg.run_id, all_series))
    artifacts.append(out / "indicator.csv")

    ok = dmap.ok_records()
    if not ok:
        print("no cavity detected from any probe")
        _manifest(cfg, scene, timings, warnings, artifacts, out)
        return 0

    margin = float(cfg.sweep["tol"]) + 2.0 * float(cfg.mesh["target_edge"])
    mask = rec.carve(cfg.slab, dmap, float(cfg.sweep["grid_resolution"]), margin)
    mask_path = out / "mask.txt"
    mask_path.parent.mkdir(parents=True, exist_ok=True)
    with open(mask_path, "w") as f:
        header = {"origin": list(mask.origin), "spacing": mask.spacing,
                  "shape": list(mask.shape)}
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for row in mask.carved[::-1]:
            f.write("".join("C" if v else "P" for v in row) + "\n")
    artifacts.append(mask_path)

    estimate = rec.extract_boundary(mask)
    brows = []
    for ci, line in enumerate(estimate.polylines):
        for vi, (x, y) in enumerate(line):
            brows.append([str(ci), str(vi), fmt(x), fmt(y)])
    _write_csv(out / "boundary.csv", BOUNDARY_HEADER, brows)
    artifacts.append(out / "boundary.csv")

    if cfg.cavity is not None:
        band = 3.0 * float(cfg.mesh["target_edge"])
        metrics = rec.evaluate(estimate, cfg.cavity, cfg.probes, band)
        sound = True
        xs, ys = mask.cell_centers()
        X, Y = np.meshgrid(xs, ys)
        centers = np.column_stack([X[mask.carved], Y[mask.carved]])
        if len(centers):
            sound = not bool(cfg.cavity.contains(centers).any())
        metrics["sound"] = sound
        errs = []
        for r in ok:
            d_true = cavity_distance(np.asarray(r.p), cfg.cavity)
            errs.append(abs(r.d_hat - d_true))
        metrics["max_distance_error"] = float(max(errs))
        mpath = out / "metrics.json"
        with open(mpath, "w") as f:
            json.dump(metrics, f, indent=2, sort_keys=True)
        artifacts.append(mpath)
        print(f"sweep: {len(ok)}/{len(dmap.records)} probes OK, "
              f"sound={sound}, hausdorff_probed={metrics['hausdorff_probed']:.4f}")
    else:
        print(f"sweep: {len(ok)}/{len(dmap.records)} probes OK")

    _manifest(cfg, scene, timings, warnings, artifacts, out)
    return 0


def cmd_validate(cfg: RunConfig, out: Path) -> int:
    """Run the built-in property checks and print a pass/fail table."""
    from .selfcheck import run_selfchecks

    results = run_selfchecks(cfg)
    width = max(len(name) for name, _, _ in results)
    ok = True
    for name, passed, detail in results:
        status = "PASS" if passed else "FAIL"
        ok = ok and passed
        print(f"{name:<{width}}  {status}  {detail}")
    return 0 if ok else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="slabscan",
        description="Probe a slab for an embedded cavity with spherical wave fronts",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=None)

    p_fwd = sub.add_parser("forward", help="one (probe, t, h) solve pair")
    common(p_fwd)
    p_fwd.add_argument("--probe", type=int, default=0)
    p_fwd.add_argument("--t", type=float, required=True)
    p_fwd.add_argument("--h", type=float, required=True)

    p_ind = sub.add_parser("indicator", help="energy-gap series for one front")
    common(p_ind)
    p_ind.add_argument("--probe", type=int, default=0)
    p_ind.add_argument("--t", type=float, required=True)

    p_sweep = sub.add_parser("sweep", help="full multi-probe reconstruction")
    common(p_sweep)

    p_val = sub.add_parser("validate", help="run built-in property checks")
    common(p_val)

    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 1
    out = Path(args.out) if args.out else cfg.output

    try:
        if args.command == "forward":
            return cmd_forward(cfg, args.probe, args.t, args.h, out)
        if args.command == "indicator":
            return cmd_indicator(cfg, args.probe, args.t, out)
        if args.command == "sweep":
            return cmd_sweep(cfg, out, workers=args.workers)
        if args.command == "validate":
            return cmd_validate(cfg, out)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
