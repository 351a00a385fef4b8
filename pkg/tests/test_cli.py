import json
import subprocess
import sys

import numpy as np
import pytest

from momentfield import model1
from momentfield.cli import main
from momentfield.io import RunManifest


def run(tmp_path, *argv):
    return main([*map(str, argv), "--out", str(tmp_path), "--workers", "1"])


def header(path):
    return path.read_text().splitlines()[0]


def test_integrate_writes_trajectory_and_manifest(tmp_path):
    assert run(tmp_path, "integrate", "model1", "--set", "I1=-0.5", "--t-end", 5, "--n-out", 11) == 0
    assert header(tmp_path / "trajectory.csv") == "t,nu_1,nu_2"
    man = RunManifest.read(tmp_path)
    assert man.command == "integrate"
    assert man.config["I"][0] == -0.5
    assert all(man.verify(tmp_path).values())
    (tmp_path / "trajectory.csv").write_text("tampered\n")
    assert not man.verify(tmp_path)["trajectory.csv"]


def test_moment_variant_header(tmp_path):
    assert run(tmp_path, "integrate", "model1", "--variant", "bcc", "--n", 0.02, "--t-end", 1, "--n-out", 3) == 0
    assert header(tmp_path / "trajectory.csv") == "t,nu_1,nu_2,corr_11,corr_12,corr_22"


def test_flag_beats_config_run_section(tmp_path):
    cfg = model1(-0.5).to_dict()
    cfg["run"] = {"t_end": 3.0, "n_out": 4}
    p = tmp_path / "net.json"
    p.write_text(json.dumps(cfg))
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run(out1, "integrate", p) == 0
    t = np.loadtxt(out1 / "trajectory.csv", delimiter=",", skiprows=1)[:, 0]
    np.testing.assert_allclose(t, np.linspace(0, 3, 4))
    assert run(out2, "integrate", p, "--t-end", 6) == 0
    t = np.loadtxt(out2 / "trajectory.csv", delimiter=",", skiprows=1)[:, 0]
    np.testing.assert_allclose(t, np.linspace(0, 6, 4))


def test_fixed_points_json(tmp_path):
    assert run(tmp_path, "fixed-points", "onepop", "--variant", "bcc") == 0
    fps = json.loads((tmp_path / "fixed_points.json").read_text())
    assert len(fps) >= 3
    assert {"state", "eigenvalues", "class", "admissible"} <= set(fps[0])


def test_sweep_outputs(tmp_path):
    assert run(tmp_path, "sweep", "model1", "--param", "I1", "--range", -5, 1) == 0
    atlas = json.loads((tmp_path / "atlas.json").read_text())
    assert sorted(p["label"] for p in atlas["points"]) == ["H1", "LP1", "LP2"]
    assert (tmp_path / "points.csv").exists()


def test_gillespie_reruns_are_byte_identical(tmp_path):
    argv = ("gillespie", "onepop", "--n", 0.02, "--paths", 8, "--t-end", 5, "--seed", 3, "--events")
    assert run(tmp_path / "a", *argv) == 0
    assert run(tmp_path / "b", *argv) == 0
    for name in ("stats.csv", "spectrum.csv", "events.bin"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert header(tmp_path / "a" / "stats.csv") == "t,nu_1,C_11"
    assert header(tmp_path / "a" / "spectrum.csv") == "freq,S_1"
    man = RunManifest.read(tmp_path / "a")
    assert man.seeds == [3]
    assert set(man.outputs) == {"stats.csv", "spectrum.csv", "events.bin"}


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("MOMENTFIELD_SEED", "77")
    assert run(tmp_path, "gillespie", "onepop", "--n", 0.05, "--paths", 2, "--t-end", 1) == 0
    assert RunManifest.read(tmp_path).seeds == [77]


def test_master_and_langevin(tmp_path):
    assert run(tmp_path / "m", "master", "onepop", "--n", 0.1, "--t-end", 2, "--points", 5) == 0
    assert header(tmp_path / "m" / "master.csv").startswith("t,")
    assert run(tmp_path / "l", "langevin", "model1", "--set", "I1=-5", "--n", 0.01, "--paths", 4, "--t-end", 2) == 0
    assert header(tmp_path / "l" / "stats.csv") == "t,nu_1,nu_2,C_11,C_12,C_22"


def test_cycle_outputs(tmp_path):
    assert run(tmp_path, "cycle", "model1", "--set", "I1=-0.5") == 0
    cyc = json.loads((tmp_path / "cycle.json").read_text())
    assert cyc["stability"] == "stable" and cyc["period"] > 0
    assert header(tmp_path / "orbit.csv") == "t,nu_1,nu_2"


def test_spectrum_outputs(tmp_path):
    assert run(tmp_path, "spectrum", "onepop", "--n", 0.02, "--paths", 4, "--t-end", 50, "--seed", 1) == 0
    assert header(tmp_path / "spectrum.csv") == "freq,S_1"
    assert set(json.loads((tmp_path / "peaks.json").read_text())) == {"pop1"}


def test_codim2_outputs(tmp_path):
    argv = ("codim2", "onepop", "--variant", "bcc", "--n", 0.02, "--param", "I", "--range", -8, -2)
    assert run(tmp_path, *argv) == 0
    assert list(tmp_path.glob("curve_*_fold.csv"))
    assert all(RunManifest.read(tmp_path).verify(tmp_path).values())


def test_empty_range_is_config_error(tmp_path):
    assert run(tmp_path, "sweep", "model1", "--param", "I1", "--range", 1, 1) == 2


def test_unknown_parameter_is_config_error(tmp_path):
    assert run(tmp_path, "integrate", "model1", "--set", "zz=1") == 2


def test_malformed_json_reports_position(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"alpha": [1.0,, 2]}')
    assert run(tmp_path, "integrate", p) == 2
    assert "bad.json:1:16" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path):
    code = run(tmp_path, "integrate", "onepop", "--variant", "infinite", "--set", "I=-5", "--init", 0.5,
               "--corr-seed", 1.0, "--t-end", 1000)
    assert code == 3


def test_master_size_refusal_exit_code(tmp_path, capsys):
    assert run(tmp_path, "master", "model1", "--n", 1 / 400) == 4
    assert "160801" in capsys.readouterr().err


@pytest.mark.slow
def test_console_script_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "momentfield.cli", "integrate", "onepop", "--t-end", "1", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "trajectory.csv").exists()
