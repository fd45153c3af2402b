"""Run configuration: one YAML file, strict schema, documented defaults.

Unknown keys are rejected and all validation problems are reported together
so a config is either fully usable or fails with the complete list of
fixes.  Defaults live in DEFAULTS and are documented in the README.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .geometry import (
    CavityShape,
    Disc,
    Ellipse,
    GeometryError,
    PolygonCavity,
    RadialStar,
    SlabGeometry,
    polygonize_cavity,
    snap_halfwidth,
    validate_cavity_in_slab,
)
from .probe import GammaBump, GammaField, HGrid, h_grid
from .reconstruct import ProbeSet
from .solver import FactorizationCache, Scene


class ConfigError(ValueError):
    """Config file failed validation; message lists every problem."""


DEFAULTS = {
    "geometry": {"d1": 0.0, "d2": 1.0, "halfwidth": "auto"},
    "gamma": {"R": 2.0, "bumps": []},
    "cavity": {"kind": "none"},
    "probes": {"line": {"side": "above", "count": 1, "spacing": 0.2,
                        "center_x": 0.0, "offset": 0.2}},
    "hgrid": {"delta_s": 0.5, "k_min": 2, "k_max": 9, "strict": True},
    "cutoff": {"delta_rel": 0.1},
    "sweep": {"t_lo": 0.3, "t_hi": 0.8, "tol": 0.01, "grid_resolution": 0.01},
    "mesh": {"target_edge": 0.03, "min_angle_deg": 20.0, "cavity_segments": 128,
             "jitter": 0.0},
    "thresholds": {"tau": 0.10, "positivity_floor_factor": 1e3,
                   "overflow_cap": 700.0},
    "indicator": {"localized": True},
    "output": "out",
    "workers": 1,
    "seed": 0,
}

_SCHEMA = {
    "geometry": {"d1", "d2", "halfwidth"},
    "gamma": {"R", "bumps"},
    "cavity": {"kind", "center", "radius", "a", "b", "rotation", "vertices",
               "a0", "cos", "sin"},
    "probes": {"line", "points"},
    "hgrid": {"delta_s", "k_min", "k_max", "strict"},
    "cutoff": {"delta_rel", "delta_abs"},
    "sweep": {"t_lo", "t_hi", "tol", "grid_resolution"},
    "mesh": {"target_edge", "min_angle_deg", "cavity_segments", "jitter"},
    "thresholds": {"tau", "positivity_floor_factor", "overflow_cap"},
    "indicator": {"localized"},
}
_LINE_KEYS = {"side", "count", "spacing", "center_x", "offset"}
_BUMP_KEYS = {"center", "radius", "amplitude"}
_POINT_KEYS = {"p", "axis"}


@dataclass
class RunConfig:
    """Validated, defaulted run configuration."""

    raw: dict
    slab: SlabGeometry
    requested_halfwidth: object  # float or "auto"
    gamma: GammaField
    cavity: CavityShape | None
    probes: ProbeSet
    grid: HGrid
    delta_rel: float
    delta_abs: float | None
    sweep: dict
    mesh: dict
    thresholds: dict
    localized: bool
    output: Path
    workers: int
    seed: int

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True).encode()
        ).hexdigest()

    @property
    def run_id(self) -> str:
        return self.config_hash()[:12]

    def delta_for(self, t: float) -> float:
        return self.delta_abs if self.delta_abs is not None else self.delta_rel * t

    def t_max(self) -> float:
        return float(self.sweep["t_hi"])

    def build_scene(self, cache: FactorizationCache | None = None,
                    halfwidth_factor: float = 1.0) -> Scene:
        """Mesh and factorize the configured scene (cavity polygonized here)."""
        slab = self.slab
        if halfwidth_factor != 1.0:
            slab = SlabGeometry(slab.d1, slab.d2, slab.halfwidth * halfwidth_factor)
        poly = None
        if self.cavity is not None:
            poly = polygonize_cavity(self.cavity, int(self.mesh["cavity_segments"]))
        return Scene(slab, poly, self.gamma, float(self.mesh["target_edge"]),
                     min_angle_deg=float(self.mesh["min_angle_deg"]),
                     jitter=float(self.mesh["jitter"]), seed=self.seed, cache=cache)


def _merge_defaults(user: dict, errors: list) -> dict:
    cfg = {}
    known_top = set(DEFAULTS)
    for key in user:
        if key not in known_top:
            errors.append(f"unknown top-level key {key!r}")
    for key, default in DEFAULTS.items():
        val = user.get(key, default)
        if isinstance(default, dict):
            if not isinstance(val, dict):
                errors.append(f"{key!r} must be a mapping")
                val = default
            allowed = _SCHEMA.get(key)
            if allowed is not None:
                for sub in val:
                    if sub not in allowed:
                        errors.append(f"unknown key {key}.{sub!r}")
            merged = dict(default)
            merged.update({k: v for k, v in val.items() if allowed is None or k in allowed})
            cfg[key] = merged
        else:
            cfg[key] = val
    return cfg


def _build_cavity(spec: dict, errors: list) -> CavityShape | None:
    kind = spec.get("kind", "none")
    try:
        if kind == "none":
            return None
        if kind == "disc":
            return Disc(tuple(spec["center"]), float(spec["radius"]))
        if kind == "ellipse":
            return Ellipse(tuple(spec["center"]), float(spec["a"]), float(spec["b"]),
                           float(spec.get("rotation", 0.0)))
        if kind == "polygon":
            return PolygonCavity(tuple(map(tuple, spec["vertices"])))
        if kind == "radial_star":
            return RadialStar(tuple(spec["center"]), float(spec["a0"]),
                              tuple(spec.get("cos", ())), tuple(spec.get("sin", ())))
        errors.append(f"unknown cavity kind {kind!r}")
    except (KeyError, TypeError, ValueError, GeometryError) as exc:
        errors.append(f"cavity: {exc}")
    return None


def _build_probes(spec: dict, slab_d1, slab_d2, errors: list):
    pts = []
    axes = []
    if "points" in spec and spec["points"]:
        for i, entry in enumerate(spec["points"]):
            extra = set(entry) - _POINT_KEYS
            if extra:
                errors.append(f"probes.points[{i}]: unknown keys {sorted(extra)}")
            try:
                p = tuple(float(v) for v in entry["p"])
                ax = tuple(float(v) for v in entry.get("axis", (1.0, 0.0)))
            except (KeyError, TypeError, ValueError) as exc:
                errors.append(f"probes.points[{i}]: {exc}")
                continue
            if slab_d1 <= p[1] <= slab_d2:
                errors.append(f"probes.points[{i}]: p lies inside the slab strip")
            pts.append(p)
            axes.append(ax)
        return np.asarray(pts, dtype=float), np.asarray(axes, dtype=float), None
    line = spec.get("line")
    if line is None:
        errors.append("probes: need either 'points' or 'line'")
        return None, None, None
    extra = set(line) - _LINE_KEYS
    if extra:
        errors.append(f"probes.line: unknown keys {sorted(extra)}")
    return None, None, line


def load_config(path) -> RunConfig:
    """Parse and validate a YAML config; every problem is reported at once."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    with open(path) as f:
        try:
            user = yaml.safe_load(f) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file is not valid YAML: {exc}") from None
    if not isinstance(user, dict):
        raise ConfigError("config root must be a mapping")

    errors: list = []
    cfg = _merge_defaults(user, errors)

    geo = cfg["geometry"]
    d1 = float(geo["d1"])
    d2 = float(geo["d2"])
    if d1 >= d2:
        errors.append(f"geometry: d1 ({d1}) must be < d2 ({d2})")

    gamma = GammaField()
    try:
        bumps = []
        for i, b in enumerate(cfg["gamma"]["bumps"]):
            extra = set(b) - _BUMP_KEYS
            if extra:
                errors.append(f"gamma.bumps[{i}]: unknown keys {sorted(extra)}")
            bumps.append(GammaBump(tuple(b["center"]), float(b["radius"]),
                                   float(b["amplitude"])))
        gamma = GammaField(tuple(bumps), float(cfg["gamma"]["R"]))
    except (KeyError, TypeError, ValueError) as exc:
        errors.append(f"gamma: {exc}")

    cavity = _build_cavity(cfg["cavity"], errors)

    hg = cfg["hgrid"]
    grid = None
    try:
        if int(hg["k_min"]) < 0 or int(hg["k_min"]) > int(hg["k_max"]):
            errors.append("hgrid: need 0 <= k_min <= k_max")
        else:
            grid = h_grid(2, float(hg["delta_s"]), int(hg["k_max"])).subset(
                int(hg["k_min"]), int(hg["k_max"]))
    except (TypeError, ValueError) as exc:
        errors.append(f"hgrid: {exc}")

    cut = cfg["cutoff"]
    delta_abs = float(cut["delta_abs"]) if "delta_abs" in cut and cut["delta_abs"] is not None else None
    delta_rel = float(cut.get("delta_rel", 0.1))
    if delta_abs is not None and delta_abs <= 0:
        errors.append("cutoff.delta_abs must be positive")
    if delta_rel <= 0:
        errors.append("cutoff.delta_rel must be positive")

    sw = dict(cfg["sweep"])
    try:
        if not (0 < float(sw["t_lo"]) < float(sw["t_hi"])):
            errors.append("sweep: need 0 < t_lo < t_hi")
        if float(sw["tol"]) <= 0:
            errors.append("sweep.tol must be positive")
    except (TypeError, ValueError) as exc:
        errors.append(f"sweep: {exc}")

    mesh = dict(cfg["mesh"])
    if float(mesh["target_edge"]) <= 0:
        errors.append("mesh.target_edge must be positive")
    if int(mesh["cavity_segments"]) < 8:
        errors.append("mesh.cavity_segments must be >= 8")

    pts, axes, line = _build_probes(cfg["probes"], d1, d2, errors)

    if errors:
        raise ConfigError("invalid config:\n  - " + "\n  - ".join(errors))

    # probe set (line probes need the slab; explicit points were checked above)
    delta_max = delta_abs if delta_abs is not None else delta_rel * float(sw["t_hi"])
    if line is not None:
        tmp_slab = SlabGeometry(d1, d2, 1.0)
        probes = ProbeSet.from_line(tmp_slab, str(line["side"]), int(line["count"]),
                                    float(line["spacing"]), float(line["center_x"]),
                                    float(line["offset"]))
    else:
        probes = ProbeSet.explicit(pts, axes)

    # lateral truncation: explicit value or auto-sized from the probe reach
    target_edge = float(mesh["target_edge"])
    if geo["halfwidth"] == "auto":
        reach = float(np.abs(probes.points[:, 0]).max()) + float(sw["t_hi"]) + delta_max
        w = reach + 2.0 * (d2 - d1)
    else:
        w = float(geo["halfwidth"])
        if w <= 0:
            raise ConfigError("invalid config:\n  - geometry.halfwidth must be positive")
    slab = SlabGeometry(d1, d2, snap_halfwidth(w, target_edge))

    post_errors = []
    for i, p in enumerate(probes.points):
        if slab.strip_distance(p) <= 0:
            post_errors.append(f"probes[{i}]: p={tuple(p)} lies inside the slab strip")
    if cavity is not None:
        try:
            validate_cavity_in_slab(cavity, slab)
        except GeometryError as exc:
            post_errors.append(str(exc))
    if post_errors:
        raise ConfigError("invalid config:\n  - " + "\n  - ".join(post_errors))

    return RunConfig(
        raw=user,
        slab=slab,
        requested_halfwidth=geo["halfwidth"],
        gamma=gamma,
        cavity=cavity,
        probes=probes,
        grid=grid,
        delta_rel=delta_rel,
        delta_abs=delta_abs,
        sweep=sw,
        mesh=mesh,
        thresholds=dict(cfg["thresholds"]),
        localized=bool(cfg["indicator"]["localized"]),
        output=Path(cfg["output"]),
        workers=int(cfg["workers"]),
        seed=int(cfg["seed"]),
    )
