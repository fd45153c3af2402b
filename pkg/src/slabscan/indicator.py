"""Energy-gap series over the semiclassical grid, slope fits and front
classification, and distance estimation by bisection on the front radius.

The decision rule is an ordinary least-squares fit of log E against 1/h on
the admissible grid (where 1/h is unit-spaced): fronts that miss the cavity
give exponentially decaying E (negative slope), fronts that cut into it give
exponential growth, and the touching front sits in a polynomially bounded
band, so a symmetric threshold tau on the slope separates the three cases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .probe import (
    BoundaryData,
    HGrid,
    ProbeParams,
    ProbeError,
    boundary_data,
    remainder_boundary_data,
    validate_probe,
)
from .solver import Scene


class IndicatorError(RuntimeError):
    """Indicator computation failed."""


OUTSIDE = "OUTSIDE"
INTERSECTING = "INTERSECTING"
TOUCHING = "TOUCHING"

# The gap is evaluated in a cancellation-free form whose absolute error is
# about eps * sqrt(E * e_full), so an entry carries signal down to
# E ~ eps^2 * e_full; the factor keeps a comfortable distance from that.
POSITIVITY_FLOOR_FACTOR = 1e3


@dataclass(frozen=True)
class SeriesEntry:
    h: float
    inv_h: float
    E: float
    identity_residual: float
    lateral_leak: float
    e_full: float


@dataclass(frozen=True)
class IndicatorSeries:
    """Map h -> energy gap for one probe and front radius."""

    probe_id: int
    p: tuple
    t: float
    localized: bool
    entries: tuple
    dead: bool

    def usable_entries(self, floor_factor: float = POSITIVITY_FLOOR_FACTOR):
        e_ref = max((e.e_full for e in self.entries), default=0.0)
        floor = floor_factor * np.finfo(float).eps ** 2 * e_ref
        return [e for e in self.entries if e.E > floor]


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float
    n_points: int


@dataclass(frozen=True)
class Classification:
    kind: str
    confidence: float  # r^2 of the slope fit (0 for dead series)


def compute_series(scene: Scene, probe_id: int, params_for_h, grid: HGrid,
                   localized: bool = True) -> IndicatorSeries:
    """Energy-gap series over the grid for one probe and front radius.

    params_for_h : callable h -> ProbeParams (fixes p, t, delta, axis).
    Entries are produced in increasing 1/h order; a series whose every entry
    sits below the positivity floor is flagged dead (front far outside, the
    signal is under roundoff).
    """
    entries = []
    for h in grid.h_values:
        params = params_for_h(float(h))
        validate_probe(params, scene.slab, grid=grid, strict=False)
        data = boundary_data(scene.pair.full, params, scene.gamma,
                             localized=localized, slab=scene.slab)
        res = scene.energy_gap(data)
        entries.append(SeriesEntry(float(h), float(1.0 / h), res.E,
                                   res.identity_residual, data.lateral_leak,
                                   res.e_full))
    entries.sort(key=lambda e: e.inv_h)
    first = entries[0]
    series = IndicatorSeries(probe_id, tuple(params.p), params.t, localized,
                             tuple(entries), dead=False)
    if not series.usable_entries():
        series = IndicatorSeries(probe_id, tuple(params.p), params.t, localized,
                                 tuple(entries), dead=True)
    return series


def fit_slope(series: IndicatorSeries,
              floor_factor: float = POSITIVITY_FLOOR_FACTOR) -> SlopeFit:
    """OLS fit of log E against 1/h over the entries above the positivity floor."""
    usable = series.usable_entries(floor_factor)
    if len(usable) < 3:
        raise IndicatorError("insufficient signal: fewer than 3 usable entries")
    x = np.array([e.inv_h for e in usable])
    y = np.log([e.E for e in usable])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    yhat = A @ coef
    ss_res = float(((y - yhat) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / max(ss_tot, 1e-300)
    return SlopeFit(float(coef[0]), float(coef[1]), r2, len(usable))


def classify(fit: SlopeFit, tau: float = 0.10) -> Classification:
    """Threshold rule: decaying -> OUTSIDE, growing -> INTERSECTING, else TOUCHING."""
    if fit.slope < -tau:
        return Classification(OUTSIDE, fit.r2)
    if fit.slope > tau:
        return Classification(INTERSECTING, fit.r2)
    return Classification(TOUCHING, fit.r2)


def classify_series(series: IndicatorSeries, tau: float = 0.10,
                    floor_factor: float = POSITIVITY_FLOOR_FACTOR) -> Classification:
    """Classification with the dead-series convention: no signal means the
    front is far outside."""
    if series.dead:
        return Classification(OUTSIDE, 0.0)
    try:
        return classify(fit_slope(series, floor_factor), tau)
    except IndicatorError:
        return Classification(OUTSIDE, 0.0)


# ---------------------------------------------------------------------------
# distance estimation


@dataclass(frozen=True)
class BisectionStep:
    t: float
    kind: str
    slope: float
    r2: float


@dataclass(frozen=True)
class DistanceEstimate:
    d_hat: float
    n_bisections: int
    trace: tuple
    series: tuple  # every IndicatorSeries probed along the way


def _probe_factory(scene: Scene, p, t, delta_rel, axis):
    def make(h):
        return ProbeParams(p=tuple(p), t=t, h=h, delta=delta_rel * t, axis=axis)
    return make


def estimate_distance(scene: Scene, probe_id: int, p, t_lo: float, t_hi: float,
                      grid: HGrid, tol: float = 0.01, tau: float = 0.10,
                      localized: bool = True, delta_rel: float = 0.1,
                      axis=(1.0, 0.0),
                      floor_factor: float = POSITIVITY_FLOOR_FACTOR) -> DistanceEstimate:
    """Bisection on the front radius between an OUTSIDE and an INTERSECTING t.

    The bracket is widened automatically: t_lo shrinks toward zero and t_hi
    grows toward the largest front the geometry admits.  If no INTERSECTING
    front exists the cavity is not detectable from p.  A TOUCHING
    classification ends the search at that t (the touching front radius is
    the distance).
    """
    p = tuple(np.asarray(p, dtype=float))
    gap = scene.slab.strip_distance(p)
    if gap <= 0:
        raise ProbeError(f"probe center {p} must lie outside the slab strip")
    t_max = (gap + scene.slab.thickness) / (1.0 + delta_rel) * (1.0 - 1e-9)
    t_min = 0.05 * scene.slab.thickness

    trace = []
    all_series = []

    def classify_at(t):
        series = compute_series(scene, probe_id, _probe_factory(scene, p, t, delta_rel, axis),
                                grid, localized)
        all_series.append(series)
        if series.dead:
            c = Classification(OUTSIDE, 0.0)
            trace.append(BisectionStep(t, c.kind, float("-inf"), 0.0))
            return c
        try:
            f = fit_slope(series, floor_factor)
        except IndicatorError:
            c = Classification(OUTSIDE, 0.0)
            trace.append(BisectionStep(t, c.kind, float("-inf"), 0.0))
            return c
        c = classify(f, tau)
        trace.append(BisectionStep(t, c.kind, f.slope, f.r2))
        return c

    t_lo = min(max(t_lo, t_min), t_max)
    t_hi = min(max(t_hi, t_lo), t_max)

    c_lo = classify_at(t_lo)
    while c_lo.kind != OUTSIDE and t_lo > t_min * (1 + 1e-9):
        t_lo = max(t_min, 0.7 * t_lo)
        c_lo = classify_at(t_lo)
    if c_lo.kind == TOUCHING:
        return DistanceEstimate(t_lo, 0, tuple(trace), tuple(all_series))
    if c_lo.kind != OUTSIDE:
        raise IndicatorError("bracket not establishable: smallest front already intersects")

    c_hi = classify_at(t_hi)
    while c_hi.kind != INTERSECTING and t_hi < t_max * (1 - 1e-9):
        t_hi = min(t_max, max(t_hi * 1.25, t_hi + 0.1 * scene.slab.thickness))
        c_hi = classify_at(t_hi)
    if c_hi.kind == TOUCHING:
        return DistanceEstimate(t_hi, 0, tuple(trace), tuple(all_series))
    if c_hi.kind != INTERSECTING:
        raise IndicatorError("cavity not detectable from p")

    n = 0
    while t_hi - t_lo > tol:
        mid = 0.5 * (t_lo + t_hi)
        c = classify_at(mid)
        n += 1
        if c.kind == TOUCHING:
            return DistanceEstimate(mid, n, tuple(trace), tuple(all_series))
        if c.kind == OUTSIDE:
            t_lo = mid
        else:
            t_hi = mid
    return DistanceEstimate(0.5 * (t_lo + t_hi), n, tuple(trace), tuple(all_series))


# ---------------------------------------------------------------------------
# localization diagnostics


def localization_error(scene: Scene, p, t: float, h: float,
                       delta_rel: float = 0.1, axis=(1.0, 0.0)) -> float:
    """Energy gap of the data the cutoff discards: (1 - cutoff) * probe.

    This is the part of the measurement localization throws away; its gap
    decays exponentially in 1/h, which is what makes localized
    classification agree with full-data classification.
    """
    params = ProbeParams(p=tuple(p), t=t, h=h, delta=delta_rel * t, axis=axis)
    validate_probe(params, scene.slab, strict=False)
    data = remainder_boundary_data(scene.pair.full, params, scene.gamma)
    return scene.energy_gap(data).E
