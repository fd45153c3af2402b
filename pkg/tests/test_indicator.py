import numpy as np
import pytest

from slabscan.indicator import (
    INTERSECTING,
    OUTSIDE,
    TOUCHING,
    Classification,
    IndicatorError,
    IndicatorSeries,
    SeriesEntry,
    SlopeFit,
    _probe_factory,
    classify,
    classify_series,
    compute_series,
    estimate_distance,
    fit_slope,
    localization_error,
)
from slabscan.probe import ProbeError, h_grid


def synthetic_series(inv_h, E, e_full=None):
    e_full = np.ones_like(inv_h) if e_full is None else e_full
    entries = tuple(
        SeriesEntry(1.0 / x, float(x), float(e), 0.0, 0.0, float(ef))
        for x, e, ef in zip(inv_h, E, e_full)
    )
    return IndicatorSeries(0, (0.0, 1.2), 0.5, True, entries, False)


def test_fit_recovers_planted_decay():
    inv_h = np.arange(3.0, 11.0)
    s = synthetic_series(inv_h, 0.3**inv_h)
    f = fit_slope(s)
    assert f.slope == pytest.approx(np.log(0.3), abs=1e-12)
    assert f.intercept == pytest.approx(0.0, abs=1e-11)
    assert f.r2 == pytest.approx(1.0, abs=1e-12)


def test_fit_recovers_planted_growth():
    inv_h = np.arange(3.0, 11.0)
    s = synthetic_series(inv_h, 5.0 * 2.0**inv_h)
    f = fit_slope(s)
    assert f.slope == pytest.approx(np.log(2.0), abs=1e-12)
    assert f.intercept == pytest.approx(np.log(5.0), abs=1e-11)


def test_fit_touching_envelope_slope():
    # E = c / h over 1/h in 3..10: OLS slope frozen from the direct
    # least-squares oracle; it stays inside the 2*tau touching band
    inv_h = np.arange(3.0, 11.0)
    s = synthetic_series(inv_h, 2.0 * inv_h)
    f = fit_slope(s)
    oracle = np.polyfit(inv_h, np.log(2.0 * inv_h), 1)[0]
    assert f.slope == pytest.approx(oracle, abs=1e-12)
    assert f.slope == pytest.approx(0.16722169379675797, abs=1e-12)
    assert abs(f.slope) < 0.2


def test_fit_requires_three_points():
    inv_h = np.array([3.0, 4.0])
    with pytest.raises(IndicatorError, match="insufficient"):
        fit_slope(synthetic_series(inv_h, 0.5**inv_h))


def test_fit_drops_sub_floor_entries():
    inv_h = np.arange(3.0, 11.0)
    E = 0.5**inv_h
    E[-2:] = 1e-30  # below the floor relative to e_full = 1
    s = synthetic_series(inv_h, E)
    f = fit_slope(s)
    assert f.n_points == 6


def test_classify_thresholds():
    assert classify(SlopeFit(-0.69, 0.0, 1.0, 8)).kind == OUTSIDE
    assert classify(SlopeFit(+0.41, 0.0, 1.0, 8)).kind == INTERSECTING
    assert classify(SlopeFit(+0.03, 0.0, 1.0, 8)).kind == TOUCHING
    assert classify(SlopeFit(-0.09, 0.0, 1.0, 8)).kind == TOUCHING


def test_classify_confidence_is_r2():
    c = classify(SlopeFit(-0.5, 0.0, 0.87, 8))
    assert c.confidence == 0.87


GRID = h_grid(2, 0.5, 9).subset(2, 9)

# The unit scenes are deliberately coarse (edge 0.05), which resolves the
# boundary data of the default grid only for probes a bit off the slab;
# theorem-grade runs on the acceptance meshes use p at offset 0.2.
UNIT_P = (0.0, 1.35)
UNIT_D0 = np.hypot(0.0, 1.35 - 0.5) - 0.2
UNIT_GRID = h_grid(2, 0.5, 6).subset(2, 6)


def test_series_outside_decreasing(small_scene):
    s = compute_series(small_scene, 0,
                       _probe_factory(small_scene, UNIT_P, 0.5, 0.1, (1, 0)),
                       UNIT_GRID, True)
    E = [e.E for e in s.entries]
    assert all(a > b for a, b in zip(E, E[1:]))
    assert classify_series(s).kind == OUTSIDE


def test_series_intersecting_increasing(small_scene):
    s = compute_series(small_scene, 0,
                       _probe_factory(small_scene, UNIT_P, 0.8, 0.1, (1, 0)),
                       UNIT_GRID, True)
    E = [e.E for e in s.entries]
    assert all(a < b for a, b in zip(E, E[1:]))
    assert classify_series(s).kind == INTERSECTING


def test_series_deterministic(small_scene):
    make = _probe_factory(small_scene, (0.0, 1.2), 0.45, 0.1, (1, 0))
    s1 = compute_series(small_scene, 0, make, GRID, True)
    s2 = compute_series(small_scene, 0, make, GRID, True)
    assert [e.E for e in s1.entries] == [e.E for e in s2.entries]


def test_series_empty_cavity_all_zero(empty_scene):
    s = compute_series(empty_scene, 0, _probe_factory(empty_scene, (0.0, 1.2), 0.4, 0.1, (1, 0)),
                       GRID, True)
    assert all(e.E == 0.0 for e in s.entries)
    assert s.dead


def test_estimate_distance_disc(small_scene):
    est = estimate_distance(small_scene, 0, UNIT_P, 0.3, 0.9, UNIT_GRID, tol=0.02)
    assert abs(est.d_hat - UNIT_D0) <= max(0.02, 2 * small_scene.target_edge)
    # bracket endpoints stay classified OUTSIDE / INTERSECTING
    kinds = {s.kind for s in est.trace}
    assert kinds <= {OUTSIDE, INTERSECTING, TOUCHING}


def test_estimate_distance_monotone_bracket(small_scene):
    est = estimate_distance(small_scene, 0, UNIT_P, 0.3, 0.9, UNIT_GRID, tol=0.02)
    lo, hi = 0.0, np.inf
    for step in est.trace:
        if step.kind == OUTSIDE:
            assert step.t >= lo
            lo = max(lo, step.t)
        elif step.kind == INTERSECTING:
            assert step.t <= hi
            hi = min(hi, step.t)
    assert lo <= est.d_hat <= hi


def test_estimate_distance_empty_cavity(empty_scene):
    with pytest.raises(IndicatorError, match="not detectable"):
        estimate_distance(empty_scene, 0, (0.0, 1.2), 0.3, 0.8, UNIT_GRID, tol=0.02)


def test_estimate_distance_probe_inside_strip(small_scene):
    with pytest.raises(ProbeError):
        estimate_distance(small_scene, 0, (0.0, 0.5), 0.3, 0.8, GRID)


def test_localization_error_decays(small_scene):
    gaps = [localization_error(small_scene, (0.0, 1.2), 0.4, float(h))
            for h in GRID.h_values]
    slope = np.polyfit(GRID.inv_h_values, np.log(gaps), 1)[0]
    assert slope < 0


def test_localization_degenerate_cutoff_rejected(small_scene):
    # a front wide enough for its cutoff to cover the whole truncated
    # boundary violates the front-radius guard first
    with pytest.raises(ProbeError):
        localization_error(small_scene, (0.0, 4.0), 4.2, 0.2)
    # and the remainder data itself refuses to be identically zero
    from slabscan.probe import ProbeParams, remainder_boundary_data

    params = ProbeParams(p=(0.0, 4.0), t=4.4, h=0.2, delta=0.5)
    with pytest.raises(ProbeError, match="remainder"):
        remainder_boundary_data(small_scene.pair.full, params, small_scene.gamma)


def test_scale_robustness_classification(small_scene):
    # scaling the data only rescales E, so slope and class are unchanged
    from slabscan.probe import ProbeParams, boundary_data

    params = ProbeParams(p=(0.0, 1.2), t=0.45, h=0.125, delta=0.045)
    data = boundary_data(small_scene.pair.full, params, small_scene.gamma,
                         localized=True, slab=small_scene.slab)
    base = small_scene.energy_gap(data).E
    scaled = type(data)(data.node_indices, 7.0 * data.values, 0.0, 0, True)
    assert small_scene.energy_gap(scaled).E == pytest.approx(49.0 * base, rel=1e-12)
