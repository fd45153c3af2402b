import json

import numpy as np
import pytest

from slabscan.cli import main
from slabscan.config import ConfigError, load_config


def write_config(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


MINIMAL = """
geometry: {d1: 0.0, d2: 1.0, halfwidth: auto}
cavity: {kind: disc, center: [0.0, 0.5], radius: 0.2}
probes:
  points:
    - {p: [0.0, 1.2]}
"""

FAST_SWEEP = """
geometry: {d1: 0.0, d2: 1.0, halfwidth: auto}
cavity: {kind: disc, center: [0.0, 0.5], radius: 0.2}
probes:
  points:
    - {p: [-0.2, 1.35]}
    - {p: [0.2, 1.35]}
hgrid: {k_min: 2, k_max: 6}
sweep: {t_lo: 0.3, t_hi: 0.9, tol: 0.03, grid_resolution: 0.02}
mesh: {target_edge: 0.05, cavity_segments: 64}
"""


def test_minimal_config_defaults(tmp_path):
    cfg = load_config(write_config(tmp_path, MINIMAL))
    assert cfg.grid.delta_S == 0.5
    assert cfg.thresholds["tau"] == 0.10
    assert cfg.mesh["cavity_segments"] == 128
    assert cfg.delta_rel == 0.1
    assert cfg.localized is True
    # auto halfwidth: reach + two thicknesses, snapped to the grid pitch
    reach = 0.0 + 0.8 + 0.08
    assert cfg.slab.halfwidth >= reach + 2.0
    assert cfg.slab.halfwidth / cfg.mesh["target_edge"] == pytest.approx(
        round(cfg.slab.halfwidth / cfg.mesh["target_edge"]))


def test_unknown_keys_rejected(tmp_path):
    path = write_config(tmp_path, MINIMAL + "\nbogus_key: 1\nmesh: {target_edge: 0.05, typo: 2}\n")
    with pytest.raises(ConfigError) as err:
        load_config(path)
    msg = str(err.value)
    assert "bogus_key" in msg
    assert "mesh.'typo'" in msg or "typo" in msg


def test_probe_inside_slab_names_index(tmp_path):
    bad = """
geometry: {d1: 0.0, d2: 1.0, halfwidth: 2.0}
cavity: {kind: none}
probes:
  points:
    - {p: [0.0, 1.2]}
    - {p: [0.0, 0.5]}
"""
    with pytest.raises(ConfigError, match=r"points\[1\]"):
        load_config(write_config(tmp_path, bad))


def test_d1_ge_d2_rejected(tmp_path):
    bad = "geometry: {d1: 1.0, d2: 0.0, halfwidth: 2.0}\n"
    with pytest.raises(ConfigError, match="d1"):
        load_config(write_config(tmp_path, bad))


def test_all_errors_reported_together(tmp_path):
    bad = """
geometry: {d1: 1.0, d2: 0.0, halfwidth: 2.0}
cavity: {kind: hexagon}
sweep: {t_lo: 0.5, t_hi: 0.1, tol: 0.01}
"""
    with pytest.raises(ConfigError) as err:
        load_config(write_config(tmp_path, bad))
    msg = str(err.value)
    assert "d1" in msg and "hexagon" in msg and "t_lo" in msg


def test_cavity_outside_slab_rejected(tmp_path):
    bad = """
geometry: {d1: 0.0, d2: 1.0, halfwidth: 2.0}
cavity: {kind: disc, center: [0.0, 0.95], radius: 0.2}
probes:
  points: [{p: [0.0, 1.2]}]
"""
    with pytest.raises(ConfigError, match="inside the slab"):
        load_config(write_config(tmp_path, bad))


def test_run_id_deterministic(tmp_path):
    c1 = load_config(write_config(tmp_path, MINIMAL, "a.yaml"))
    c2 = load_config(write_config(tmp_path, MINIMAL, "b.yaml"))
    assert c1.run_id == c2.run_id
    c3 = load_config(write_config(tmp_path, MINIMAL + "\nseed: 3\n", "c.yaml"))
    assert c3.run_id != c1.run_id


def test_cli_bad_config_exit_code(tmp_path, capsys):
    path = write_config(tmp_path, "geometry: {d1: 1.0, d2: 0.0}\n")
    assert main(["indicator", "--config", str(path), "--t", "0.4"]) == 1
    assert "d1" in capsys.readouterr().err


def test_cli_missing_config_exit_code(tmp_path):
    assert main(["sweep", "--config", str(tmp_path / "nope.yaml")]) == 1


def test_cli_runtime_failure_exit_code(tmp_path, capsys):
    path = write_config(tmp_path, MINIMAL + "\nmesh: {target_edge: 0.05, cavity_segments: 64}\n")
    # probe index out of range -> runtime failure, exit 2
    assert main(["indicator", "--config", str(path), "--probe", "5", "--t", "0.4",
                 "--out", str(tmp_path / "o")]) == 2


def test_cli_indicator_outputs(tmp_path):
    path = write_config(tmp_path, FAST_SWEEP)
    out = tmp_path / "out"
    assert main(["indicator", "--config", str(path), "--t", "0.5",
                 "--out", str(out)]) == 0
    header = (out / "indicator.csv").read_text().splitlines()[0]
    assert header == ("run_id,probe_id,p_x,p_y,t,h,inv_h,E,identity_residual,"
                      "lateral_leak,localized")
    slopes = (out / "slopes.csv").read_text().splitlines()
    assert slopes[0] == "probe_id,t,slope,intercept,r2,classification"
    assert len(slopes) == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["mesh"]["min_angle_deg"] >= 20.0
    assert "indicator.csv" in "".join(manifest["artifacts"])


def test_cli_forward_outputs(tmp_path):
    path = write_config(tmp_path, FAST_SWEEP)
    out = tmp_path / "out"
    assert main(["forward", "--config", str(path), "--t", "0.5", "--h", "0.2",
                 "--out", str(out)]) == 0
    gap = json.loads((out / "energy_gap.json").read_text())
    assert gap["E"] >= 0
    assert gap["identity_residual"] <= 1e-10
    sol = (out / "solution_full.csv").read_text().splitlines()
    assert sol[0] == "x,y,re,im"
    assert len(sol) > 100


def test_cli_sweep_outputs_and_reproducibility(tmp_path):
    path = write_config(tmp_path, FAST_SWEEP)
    out1 = tmp_path / "r1"
    out2 = tmp_path / "r2"
    assert main(["sweep", "--config", str(path), "--out", str(out1),
                 "--workers", "1"]) == 0
    assert main(["sweep", "--config", str(path), "--out", str(out2),
                 "--workers", "4"]) == 0
    for name in ("distances.csv", "indicator.csv", "boundary.csv", "mask.txt"):
        b1 = (out1 / name).read_bytes()
        b2 = (out2 / name).read_bytes()
        assert b1 == b2, f"{name} differs between worker counts"
    # mask format: JSON header then C/P rows
    lines = (out1 / "mask.txt").read_text().splitlines()
    header = json.loads(lines[0])
    assert set(header) == {"origin", "spacing", "shape"}
    assert set("".join(lines[1:])) <= {"C", "P"}
    assert len(lines) - 1 == header["shape"][0]


def test_cli_sweep_empty_cavity(tmp_path, capsys):
    cfg = """
geometry: {d1: 0.0, d2: 1.0, halfwidth: auto}
cavity: {kind: none}
probes:
  points: [{p: [0.0, 1.35]}]
hgrid: {k_min: 2, k_max: 6}
sweep: {t_lo: 0.3, t_hi: 0.8, tol: 0.05, grid_resolution: 0.02}
mesh: {target_edge: 0.05}
"""
    path = write_config(tmp_path, cfg)
    assert main(["sweep", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    assert "no cavity detected" in capsys.readouterr().out


def test_cli_validate(tmp_path, capsys):
    path = write_config(tmp_path, FAST_SWEEP)
    rc = main(["validate", "--config", str(path), "--out", str(tmp_path / "v")])
    out = capsys.readouterr().out
    assert rc == 0, out
    assert "PASS" in out and "FAIL" not in out


def test_float_format_round_trips(tmp_path):
    from slabscan.cli import fmt

    for x in (0.1, 1 / 3, 1e-300, 123456.789e-12, np.float64(0.4875)):
        assert float(fmt(x)) == float(x)
