import cmath

import numpy as np
import pytest

from slabscan.geometry import Disc, EdgeTag, SlabGeometry, build_nested_meshes, polygonize_cavity, snap_halfwidth
from slabscan.probe import (
    GammaBump,
    GammaField,
    LogComplex,
    ProbeError,
    ProbeParams,
    amplitude,
    boundary_data,
    cutoff,
    eikonal_residuals,
    h_grid,
    phase,
    phase_gradients,
    probe_complex,
    probe_value,
    remainder_boundary_data,
    residual_diagnostic,
    transport_residual,
    validate_probe,
    write_diagnostics_csv,
)

SLAB = SlabGeometry(0.0, 1.0, 2.0)


# ---------------------------------------------------------------------------
# h grid


def test_h_grid_values():
    grid = h_grid(2, 0.5, 7)
    assert grid.h_values[0] == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert grid.h_values[7] == pytest.approx(0.1, abs=1e-15)


def test_h_grid_unit_spacing_and_decrease():
    grid = h_grid(2, 0.5, 10)
    inv = grid.inv_h_values
    assert np.allclose(np.diff(inv), 1.0, atol=1e-12)
    assert np.all(np.diff(grid.h_values) < 0)


def test_h_grid_preconditions():
    with pytest.raises(ProbeError):
        h_grid(2, -0.1, 5)
    with pytest.raises(ProbeError):
        h_grid(2, 0.5, -1)


def test_h_grid_membership():
    grid = h_grid(2, 0.5, 20)
    assert grid.contains(1.0 / 10.0)
    assert not grid.contains(1.0 / 10.3)


# ---------------------------------------------------------------------------
# phase and amplitude


def test_phase_parallel_antiparallel_perpendicular():
    p = np.array([0.0, 0.0])
    axis = (1.0, 0.0)
    phi, psi = phase(np.array([1.0, 0.0]), p, axis)
    assert phi == pytest.approx(0.0, abs=1e-15)
    assert psi == pytest.approx(0.0, abs=1e-15)
    _, psi = phase(np.array([-2.0, 0.0]), p, axis)
    assert psi == pytest.approx(np.pi, abs=1e-15)
    phi, psi = phase(np.array([0.0, np.e]), p, axis)
    assert phi == pytest.approx(1.0, abs=1e-15)
    assert psi == pytest.approx(np.pi / 2, abs=1e-15)


def test_phase_singular_point():
    with pytest.raises(ProbeError, match="singular"):
        phase(np.array([0.0, 0.5]), np.array([0.0, 0.5]), (1, 0))


def test_amplitude_dimension_two_is_one():
    lc = amplitude(np.array([0.3, 0.7]), np.array([0.0, 1.5]), 2)
    assert lc.logmag == pytest.approx(0.0, abs=1e-15)
    assert lc.phase == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("n,r_perp", [(3, 0.5), (4, 1.0)])
def test_amplitude_matches_principal_branch(n, r_perp):
    # independent oracle: direct complex arithmetic on (2i r)^((2-n)/2)
    expected = (2j * r_perp) ** ((2 - n) / 2)
    x = np.zeros(n)
    x[1] = r_perp  # perpendicular to the first-axis direction
    p = np.zeros(n)
    axis = np.zeros(n)
    axis[0] = 1.0
    lc = amplitude(x, p, n, axis)
    assert np.exp(lc.logmag) == pytest.approx(abs(expected), rel=1e-14)
    assert lc.phase == pytest.approx(cmath.phase(expected), abs=1e-14)


def test_amplitude_axis_singularity():
    x = np.array([0.5, 0.0, 0.0])
    with pytest.raises(ProbeError):
        amplitude(x, np.zeros(3), 3, (1.0, 0.0, 0.0))


# ---------------------------------------------------------------------------
# probe field


def make_params(t=0.5, h=0.1, p=(0.0, 1.5), delta=0.05):
    return ProbeParams(p=p, t=t, h=h, delta=delta)


def test_probe_unit_magnitude_on_front():
    params = make_params()
    x = np.array([0.0, 1.0])  # |x - p| = 0.5 = t
    lc = probe_value(x, params, GammaField())
    assert lc.logmag == pytest.approx(0.0, abs=1e-15)


def test_probe_decay_beyond_front():
    params = make_params(t=0.25, h=0.1, p=(0.0, 1.0))
    x = np.array([0.0, 0.5])  # |x - p| = 0.5 = 2t
    lc = probe_value(x, params, GammaField())
    assert np.exp(lc.logmag) == pytest.approx(2.0**-10, rel=1e-12)


def test_probe_constant_gamma_scaling():
    # gamma ~ 4 on the front: magnitude gamma^(-1/2) ~ 1/2
    gamma = GammaField((GammaBump((0.0, 0.0), 500.0, 3.0),), R=1000.0)
    params = make_params(t=0.5, p=(0.0, 1.5))
    x = np.array([0.0, 1.0])
    g = gamma.value(x[None, :])[0]
    assert g == pytest.approx(4.0, rel=1e-4)
    lc = probe_value(x, params, gamma)
    assert np.exp(lc.logmag) == pytest.approx(g**-0.5, rel=1e-12)


def test_probe_monotone_in_inv_h():
    gamma = GammaField()
    x_out = np.array([0.4, 0.6])
    x_in = np.array([0.05, 1.1])
    p = (0.0, 1.5)
    mags_out, mags_in = [], []
    for h in (0.25, 0.2, 0.125, 0.1):
        params = make_params(t=0.5, h=h, p=p)
        mags_out.append(probe_value(x_out, params, gamma).logmag)
        mags_in.append(probe_value(x_in, params, gamma).logmag)
    assert np.all(np.diff(mags_out) < 0)  # |x-p| > t: decays as 1/h grows
    assert np.all(np.diff(mags_in) > 0)   # |x-p| < t: grows


def test_logcomplex_overflow_cap():
    lc = LogComplex(np.array([800.0, 1.0]), np.array([0.0, 0.0]))
    vals, clamped = lc.to_complex(cap=700.0)
    assert clamped == 1
    assert np.isfinite(vals).all()


# ---------------------------------------------------------------------------
# cutoff


def test_cutoff_plateau_and_support():
    params = make_params(t=0.5, delta=0.1, p=(0.0, 0.0))
    r = lambda s: np.array([s, 0.0])
    assert cutoff(r(0.5), params) == pytest.approx(1.0)
    assert cutoff(r(0.55), params) == pytest.approx(1.0)  # inside t + delta/2
    assert cutoff(r(0.6), params) == pytest.approx(0.0)
    mid = cutoff(r(0.575), params)
    assert 0.0 < mid < 1.0
    xs = np.linspace(0.5, 0.62, 200)
    vals = cutoff(np.column_stack([xs, np.zeros_like(xs)]), params)
    assert np.all(np.diff(vals) <= 1e-12)


def test_cutoff_derivatives_vanish_at_band_ends():
    params = make_params(t=0.5, delta=0.1, p=(0.0, 0.0))
    e = 1e-4

    def chi(s):
        return cutoff(np.array([s, 0.0]), params)

    for s in (0.55, 0.6):
        d1 = (chi(s + e) - chi(s - e)) / (2 * e)
        d2 = (chi(s + e) - 2 * chi(s) + chi(s - e)) / e**2
        assert abs(d1) < 1e-6
        assert abs(d2) < 1e-3


# ---------------------------------------------------------------------------
# structural identities


def test_eikonal_identities_analytic(rng):
    p = (0.3, 2.5)
    pts = np.column_stack([rng.uniform(-2, 2, 1000), rng.uniform(0, 1, 1000)])
    q1, q2 = eikonal_residuals(pts, p, (1.0, 0.0))
    assert np.abs(q1).max() < 1e-8
    assert np.abs(q2).max() < 1e-8


def test_phase_gradients_match_finite_differences(rng):
    p = np.array([0.3, 2.5])
    axis = (1.0, 0.0)
    e = 1e-6
    for _ in range(50):
        x = np.array([rng.uniform(-2, 2), rng.uniform(0, 1)])
        gphi, gpsi = phase_gradients(x, p, axis)
        for k in range(2):
            dq = np.zeros(2)
            dq[k] = e
            fp = phase(x + dq, p, axis)
            fm = phase(x - dq, p, axis)
            assert gphi[k] == pytest.approx((fp[0] - fm[0]) / (2 * e), abs=1e-6)
            assert gpsi[k] == pytest.approx((fp[1] - fm[1]) / (2 * e), abs=1e-6)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_transport_identity(n, rng):
    p = np.zeros(n)
    p[-1] = 2.5
    axis = np.zeros(n)
    axis[0] = 1.0
    pts = rng.uniform(-1, 1, size=(200, n))
    pts[:, -1] = rng.uniform(0, 1, size=200)
    d = pts - p
    x1 = d @ axis
    r_perp = np.sqrt(np.maximum((d * d).sum(axis=1) - x1**2, 0.0))
    pts = pts[r_perp > 0.3]
    res = transport_residual(pts, p, n, axis)
    assert res.max() < 1e-6


def test_residual_diagnostic_harmonic():
    # unit conductivity in the plane: the probe is exactly harmonic away
    # from the axis line, so the 0.01-spaced stencil sees pure truncation
    params = ProbeParams(p=(0.0, 2.5), t=1.0, h=1.0 / 3.0, delta=0.1)
    rng = np.random.default_rng(7)
    pts = []
    while len(pts) < 100:
        q = np.array([rng.uniform(-1.5, 1.5), rng.uniform(0.05, 0.95)])
        if abs(q[1] - 2.5) > 1.3 and abs(q[1] - 2.5) > 0.1:
            pts.append(q)
    res = residual_diagnostic(params, GammaField(), np.asarray(pts), step=0.01)
    assert res < 1e-6


def test_residual_diagnostic_variable_gamma_bounded():
    gamma = GammaField((GammaBump((0.0, 0.5), 0.3, 0.5),), R=1.0)
    pts = np.array([[0.1, 0.5], [0.0, 0.45], [-0.15, 0.6]])
    res = []
    for h in (1 / 3, 1 / 5, 1 / 9):
        params = ProbeParams(p=(0.0, 2.5), t=1.0, h=h, delta=0.1)
        res.append(residual_diagnostic(params, gamma, pts, step=0.005))
    # residual is O(1) in h (the neglected term is h^2 * q * v pointwise),
    # so residual * h^2 -> 0 along the grid
    assert res[2] < 10 * res[0]
    assert res[2] * (1 / 9) ** 2 < res[0]


# ---------------------------------------------------------------------------
# boundary data


@pytest.fixture(scope="module")
def disc_mesh():
    slab = SlabGeometry(0.0, 1.0, snap_halfwidth(2.0, 0.05))
    poly = polygonize_cavity(Disc((0.0, 0.5), 0.2), 64)
    return slab, build_nested_meshes(slab, poly, 0.05)


def test_localized_data_zero_outside_support(disc_mesh):
    slab, pair = disc_mesh
    params = ProbeParams(p=(0.0, 1.2), t=0.4, h=0.1, delta=0.04)
    data = boundary_data(pair.full, params, GammaField(), localized=True, slab=slab)
    pts = pair.full.vertices[data.node_indices]
    r = np.hypot(pts[:, 0] - 0.0, pts[:, 1] - 1.2)
    outside = r >= params.t + params.delta
    assert np.all(data.values[outside] == 0.0)
    assert data.lateral_leak == 0.0


def test_front_node_unit_magnitude(disc_mesh):
    slab, pair = disc_mesh
    params = ProbeParams(p=(0.0, 1.2), t=0.4, h=0.1, delta=0.04)
    data = boundary_data(pair.full, params, GammaField(), localized=False, slab=slab)
    pts = pair.full.vertices[data.node_indices]
    r = np.hypot(pts[:, 0] - 0.0, pts[:, 1] - 1.2)
    k = np.argmin(np.abs(r - params.t))
    expected = (params.t / r[k]) ** (1 / params.h)
    assert abs(data.values[k]) == pytest.approx(expected, rel=1e-12)


def test_remainder_data_magnitude_formula(disc_mesh):
    slab, pair = disc_mesh
    params = ProbeParams(p=(0.0, 1.2), t=0.4, h=0.1, delta=0.04)
    data = remainder_boundary_data(pair.full, params, GammaField())
    pts = pair.full.vertices[data.node_indices]
    r = np.hypot(pts[:, 0] - 0.0, pts[:, 1] - 1.2)
    beyond = r >= params.t + 2 * params.delta
    expected = (params.t / r[beyond]) ** (1 / params.h)
    assert np.allclose(np.abs(data.values[beyond]), expected, rtol=1e-12)


def test_localized_needs_wide_truncation():
    slab = SlabGeometry(0.0, 1.0, snap_halfwidth(0.5, 0.05))
    pair = build_nested_meshes(slab, None, 0.05)
    params = ProbeParams(p=(0.0, 1.2), t=0.5, h=0.2, delta=0.05)
    with pytest.raises(ProbeError, match="halfwidth"):
        boundary_data(pair.full, params, GammaField(), localized=True, slab=slab)


def test_validate_probe_errors():
    grid = h_grid(2, 0.5, 10)
    with pytest.raises(ProbeError, match="outside"):
        validate_probe(ProbeParams(p=(0.0, 0.5), t=0.3, h=0.1, delta=0.03), SLAB)
    with pytest.raises(ProbeError, match="t \\+ delta"):
        validate_probe(ProbeParams(p=(0.0, 1.1), t=1.2, h=0.1, delta=0.12), SLAB)
    with pytest.raises(ProbeError, match="axis"):
        validate_probe(ProbeParams(p=(0.0, 1.2), t=0.3, h=0.1, delta=0.03,
                                   axis=(0.0, -1.0)), SLAB)
    with pytest.raises(ProbeError, match="grid"):
        validate_probe(ProbeParams(p=(0.0, 1.2), t=0.3, h=0.1234, delta=0.03),
                       SLAB, grid=grid, strict=True)
    validate_probe(ProbeParams(p=(0.0, 1.2), t=0.3, h=0.1, delta=0.03),
                   SLAB, grid=grid, strict=True)


# ---------------------------------------------------------------------------
# gamma field


def test_gamma_derivatives_match_finite_differences(rng):
    gamma = GammaField((GammaBump((0.1, 0.5), 0.3, 0.8),
                        GammaBump((-0.2, 0.4), 0.2, -0.3)), R=1.0)
    e = 1e-5
    for _ in range(40):
        q = np.array([rng.uniform(-0.5, 0.5), rng.uniform(0.1, 0.9)])
        g = gamma.gradient(q[None, :])[0]
        lap = gamma.laplacian(q[None, :])[0]
        fd_g = np.array([
            (gamma.value([q + [e, 0]])[0] - gamma.value([q - [e, 0]])[0]) / (2 * e),
            (gamma.value([q + [0, e]])[0] - gamma.value([q - [0, e]])[0]) / (2 * e),
        ])
        fd_lap = (
            gamma.value([q + [e, 0]])[0] + gamma.value([q - [e, 0]])[0]
            + gamma.value([q + [0, e]])[0] + gamma.value([q - [0, e]])[0]
            - 4 * gamma.value([q])[0]
        ) / e**2
        assert np.allclose(g, fd_g, atol=1e-6)
        assert lap == pytest.approx(fd_lap, abs=1e-4)


def test_gamma_validation():
    with pytest.raises(ProbeError):
        GammaField((GammaBump((0, 0), 0.5, -1.5),), R=1.0)
    with pytest.raises(ProbeError):
        GammaField((GammaBump((5.0, 0), 0.5, 0.5),), R=1.0)
    g = GammaField((GammaBump((0, 0.5), 0.3, 0.5),), R=1.0)
    assert g.value(np.array([[0.9, 0.5]]))[0] == 1.0  # outside the bump


def test_diagnostics_csv(tmp_path):
    params = ProbeParams(p=(0.0, 2.5), t=1.0, h=1 / 3, delta=0.1)
    path = tmp_path / "diag.csv"
    write_diagnostics_csv(path, params, GammaField(), [[0.4, 0.5], [0.2, 0.8]])
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,logmag,phase,residual"
    assert len(lines) == 3
    assert float(lines[1].split(",")[4]) < 1e-6
