import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from aep_decomp.cli import main, six_ports
from aep_decomp.config import ConfigError, parse_scenario

BASE = """
[scenario]
nx = {nx}
ny = {ny}
grid_step_deg = {step}
uv_points = 21
steer_thetas_deg = {steer}
bench_sizes = 3x3
bench_repeats = 1
{extra}
"""


def scenario_file(tmp_path, nx=3, ny=3, step=2.0, steer="0", extra="", name="s.ini"):
    p = tmp_path / name
    p.write_text(BASE.format(nx=nx, ny=ny, step=step, steer=steer, extra=extra))
    return p


def run(mode, cfg, out, *extra):
    return main([mode, "--config", str(cfg), "--out", str(out), *extra])


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_six_ports():
    assert six_ports(5, 5) == [(1, 1), (3, 1), (5, 1), (1, 3), (3, 3), (5, 5)]
    assert six_ports(1, 1) == [(1, 1)]


@pytest.mark.parametrize("mode,expected", [
    ("oracle", ["aep/oracle/port_009.csv", "currents_oracle.csv", "spectrum_oracle.csv", "z_oracle.csv"]),
    ("estimate", ["aep/estimated/port_009.csv", "currents_estimated.csv", "spectrum_estimated.csv",
                  "z_isolated.csv", "z_u.csv", "z_v.csv", "transfer_2d.csv"]),
    ("compare", ["compare_summary.csv", "six_port_cut.csv", "aep/oracle/port_001.csv",
                 "aep/estimated/port_001.csv"]),
    ("synthesize", ["mse_vs_steering.csv", "synth/theta_+000.0/pattern_oracle.csv",
                    "synth/theta_+000.0/pattern_proposed.csv",
                    "synth/theta_+000.0/pattern_pmm-isolated.csv",
                    "synth/theta_+000.0/uv_oracle.csv",
                    "synth/theta_+000.0/uv_error_proposed.csv"]),
    ("bench", ["bench.csv", "bench_breakdown.csv", "bench_summary.txt"]),
])
def test_mode_artifacts(tmp_path, mode, expected):
    cfg = scenario_file(tmp_path)
    out = tmp_path / "out"
    assert run(mode, cfg, out, "--dump-z", "--dump-transfer") == 0
    m = manifest(out)
    assert m["mode"] == mode
    for rel in expected:
        assert rel in m["artifacts"]
    for rel in m["artifacts"]:
        assert (out / rel).stat().st_size > 0


def test_row_compare_is_exact(tmp_path):
    out = tmp_path / "out"
    assert run("compare", scenario_file(tmp_path, nx=1, ny=5), out) == 0
    s = manifest(out)["summary"]
    assert s["ports"] == 5
    assert s["max_mag_err_db"] <= 1e-10


def test_square_summary_lists_ports(tmp_path):
    out = tmp_path / "out"
    assert run("compare", scenario_file(tmp_path), out) == 0
    s = manifest(out)["summary"]
    assert s["ports"] == 9
    assert len(read_csv(out / "compare_summary.csv")) == 9
    assert np.isfinite(s["spectrum_max_dev_db"])


def test_corner_and_center_aeps_differ(tmp_path):
    out = tmp_path / "out"
    assert run("oracle", scenario_file(tmp_path, nx=5, ny=5, step=1.0), out) == 0
    corner = np.array([float(r["mag_db_normalized"]) for r in read_csv(out / "aep/oracle/port_001.csv")])
    center = np.array([float(r["mag_db_normalized"]) for r in read_csv(out / "aep/oracle/port_013.csv")])
    assert np.abs(np.maximum(corner, -80) - np.maximum(center, -80)).max() > 0.1


def test_steering_sweep_rows(tmp_path):
    out = tmp_path / "out"
    cfg = scenario_file(tmp_path, steer="-30:30:5")
    assert run("synthesize", cfg, out) == 0
    rows = read_csv(out / "mse_vs_steering.csv")
    for method in ("proposed", "pmm-isolated"):
        sel = [r for r in rows if r["method"] == method]
        assert len(sel) == 13
        assert [float(r["theta0_deg"]) for r in sel] == [float(t) for t in range(-30, 31, 5)]


def test_single_element_synthesis_self_consistent(tmp_path):
    # one element: every method radiates the isolated current, so the errors vanish
    out = tmp_path / "out"
    assert run("synthesize", scenario_file(tmp_path, nx=1, ny=1), out) == 0
    for r in read_csv(out / "mse_vs_steering.csv"):
        assert float(r["mse_db2"]) <= 1e-20


def test_deterministic_outputs(tmp_path):
    cfg = scenario_file(tmp_path, steer="0 15")
    a, b = tmp_path / "a", tmp_path / "b"
    for mode in ("compare", "synthesize"):
        assert run(mode, cfg, a) == 0
        assert run(mode, cfg, b) == 0
        for rel in manifest(a)["artifacts"]:
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_config_error_exit(tmp_path, capsys):
    cfg = scenario_file(tmp_path, extra="dx_wavelengths = -1\ntaper = hann")
    assert run("compare", cfg, tmp_path / "out") == 2
    err = capsys.readouterr().err
    assert "dx_wavelengths" in err and "taper" in err
    cfg = scenario_file(tmp_path, extra="bogus = 3", name="b.ini")
    assert run("compare", cfg, tmp_path / "out") == 2
    assert "bogus" in capsys.readouterr().err


def test_missing_config_exit(tmp_path):
    assert run("compare", tmp_path / "nope.ini", tmp_path / "out") == 2


def test_overlapping_dipoles_rejected():
    with pytest.raises(ConfigError):
        parse_scenario("[scenario]\ndx_wavelengths = 0.1\ndipole_length_wavelengths = 0.12")


def test_numerical_failure_exit(tmp_path, capsys):
    # z-directed wires closer than one diameter
    extra = "element_axis = z\ndipole_length_wavelengths = 0.47\ndx_wavelengths = 0.001\ntune_to_resonance = false"
    assert run("oracle", scenario_file(tmp_path, nx=2, ny=1, extra=extra), tmp_path / "out") == 3
    assert "numerical failure" in capsys.readouterr().err


def test_size_guard_exit(tmp_path, capsys):
    assert run("oracle", scenario_file(tmp_path, nx=50, ny=40), tmp_path / "out") == 4
    assert "refused" in capsys.readouterr().err


def test_bench_single_row(tmp_path):
    out = tmp_path / "out"
    assert run("bench", scenario_file(tmp_path), out) == 0
    rows = read_csv(out / "bench.csv")
    assert len(rows) == 1
    assert (rows[0]["nx"], rows[0]["ny"], rows[0]["unknowns_oracle"]) == ("3", "3", "99")


def test_console_script(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "aep_decomp.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "synthesize" in proc.stdout


@pytest.mark.slow
def test_bench_full_ladder(tmp_path):
    cfg = tmp_path / "ladder.ini"
    cfg.write_text("[scenario]\nbench_sizes = 3x3, 5x4, 7x5, 9x7\nbench_repeats = 3\n")
    out = tmp_path / "out"
    assert run("bench", cfg, out) == 0
    rows = read_csv(out / "bench.csv")
    assert len(rows) == 4
    speedup = [float(r["speedup"]) for r in rows]
    assert all(b >= a for a, b in zip(speedup, speedup[1:]))
    line = next(l for l in (out / "bench_summary.txt").read_text().splitlines() if "exponent" in l)
    oracle_exp = float(line.rsplit("oracle", 1)[1])
    assert 2.0 <= oracle_exp <= 3.5
