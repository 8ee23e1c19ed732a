import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from comtrap import cli
from comtrap.cli import main, run

TRAP = {"ax": 1, "ay": 4, "az": 9}


def call(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


# -- spectrum ---------------------------------------------------------------

def test_spectrum_classification_switches_at_boundaries(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"trap": TRAP}))
    code, out, _ = call(capsys, "spectrum", "--config", str(cfg), "--omega-range", "0:3:0.01",
                        "--axis", "0,0,1")
    assert code == 0
    table = rows(out)
    assert len(table) == 301
    unstable = [float(r["omega"]) for r in table if r["classification"] == "Unstable"]
    # first and last unstable grid points sit within one step of 1 and 2
    assert 1.0 <= min(unstable) <= 1.01 + 1e-12
    assert 1.99 - 1e-12 <= max(unstable) <= 2.0
    assert {r["classification"] for r in table} <= {"Stable", "Unstable", "Marginal"}


def test_spectrum_closed_form_columns(capsys):
    code, out, _ = call(capsys, "spectrum", "--omega-range", "0.5:0.7:0.1", "--closed-form")
    assert code == 0
    table = rows(out)
    assert "w_plus_sq" in table[0] and "w_minus_sq" in table[0]
    code, _, err = call(capsys, "spectrum", "--closed-form", "--axis", "1,1,0")
    assert code == 1 and json.loads(err)["error"] == "ValidationError"


def test_spectrum_is_independent_of_thread_count(capsys):
    outs = [call(capsys, "spectrum", "--omega-range", "0:3:0.05", "--threads", str(n))[1]
            for n in (1, 4)]
    assert outs[0] == outs[1]


def test_csv_floats_round_trip(capsys):
    _, out, _ = call(capsys, "spectrum", "--omega-range", "0.1:0.1:1")
    value = rows(out)[0]["re_w1sq"]
    assert format(float(value), ".17g") == value


# -- window -----------------------------------------------------------------

def test_window_anisotropic_and_symmetric(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"trap": TRAP}))
    code, out, _ = call(capsys, "window", "--config", str(cfg), "--method", "bisection")
    assert code == 0
    win = json.loads(out)
    assert win["lo"] == pytest.approx(1.0, abs=1e-6) and win["hi"] == pytest.approx(2.0, abs=1e-6)
    assert win["degenerate"] is False
    cfg.write_text(json.dumps({"trap": {"ax": 2, "ay": 2, "az": 5}}))
    _, out, _ = call(capsys, "window", "--config", str(cfg), "--details")
    win = json.loads(out)
    assert win["degenerate"] is True
    assert abs(win["discriminant"]["delta"]) <= 1e-12


# -- trajectory -------------------------------------------------------------

def test_trajectory_csv_and_boundary_column(capsys):
    code, out, _ = call(capsys, "trajectory", "--r0", "1,0,0", "--t-end", "6.283185307179586",
                        "--dt", "0.005", "--with-boundary")
    assert code == 0
    table = rows(out)
    f = np.array([float(r["f"]) for r in table])
    fb = np.array([float(r["f_boundary"]) for r in table])
    assert np.max(np.abs(f - fb)) <= 1e-9
    assert float(table[-1]["Rx"]) == pytest.approx(1.0, abs=1e-8)


def test_trajectory_rotating_frame(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"trap": TRAP, "rotation": {"omega": [0, 0, 0.5]}}))
    code, out, _ = call(capsys, "trajectory", "--config", str(cfg), "--frame", "rot",
                        "--t-end", "2")
    assert code == 0 and len(rows(out)) > 10
    code, _, err = call(capsys, "trajectory", "--config", str(cfg), "--frame", "rot",
                        "--with-boundary", "--t-end", "1")
    assert code == 1


def test_dt_bound_and_force(capsys):
    code, _, err = call(capsys, "trajectory", "--dt", "0.5", "--t-end", "1")
    assert code == 1 and "stability bound" in json.loads(err)["message"]
    code, _, _ = call(capsys, "trajectory", "--dt", "0.5", "--t-end", "1", "--force")
    assert code == 0


def test_instability_abort_exits_2_with_partial_output(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"trap": TRAP, "rotation": {"omega": [0, 0, 1.5]}}))
    out = tmp_path / "traj.csv"
    code, _, err = call(capsys, "trajectory", "--config", str(cfg), "--frame", "rot",
                        "--t-end", "200", "--out", str(out))
    assert code == 2
    assert json.loads(err)["error"] == "InstabilityAbort"
    assert len(rows(out.read_text())) > 1


# -- verify-family ----------------------------------------------------------

def test_verify_family_default_scenario_passes(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenario": "verify-family", "trap": TRAP}))
    out = tmp_path / "report.json"
    code, _, _ = call(capsys, "run", "--config", str(cfg), "--out", str(out),
                      "--seed", "7")
    assert code == 0
    report = json.loads(out.read_text())
    assert report["passed"] is True
    assert all(c["passed"] for c in report["checks"])
    assert report["parameters"]["seed"] == 7


def test_verify_family_snapshot(tmp_path, capsys):
    snap = tmp_path / "gs"
    code, out, _ = call(capsys, "verify-family", "--grid", "256,8", "--t-checks", "0.5",
                        "--dt", "2e-3", "--dump-snapshot", str(snap))
    assert code == 0 and json.loads(out)["passed"] is True
    assert (tmp_path / "gs.bin").exists() and (tmp_path / "gs.json").exists()


# -- fewbody ----------------------------------------------------------------

def test_fewbody_harmonic(capsys):
    code, out, _ = call(capsys, "fewbody", "--a", "1", "--interaction", "harmonic:0.5",
                        "--grid", "256,6", "--k", "10", "--transform-check", "--r0", "0.3")
    assert code == 0
    res = json.loads(out)
    assert len(res["eigenvalues"]) == 10 and res["ladder_fit"] is not None
    assert res["max_error"] < 1e-2
    assert res["transform_check"]["marginal_change"] <= 1e-10
    assert res["transform_check"]["com_shift"] == pytest.approx(0.3, abs=1e-8)


def test_fewbody_resolution_error(capsys):
    code, _, err = call(capsys, "fewbody", "--interaction", "gaussian:1,0.1", "--grid", "128,4")
    assert code == 1 and "need N >=" in json.loads(err)["message"]


# -- plumbing ---------------------------------------------------------------

def test_validation_exit_codes(tmp_path, capsys):
    for argv in (["nonsense"], ["spectrum", "--omega-range", "3:0:1"],
                 ["fewbody", "--interaction", "cubic:1"], ["run"]):
        code, _, err = call(capsys, *argv)
        assert code == 1, argv
        assert json.loads(err)["exit_code"] == 1
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenario": "window", "extra": 1}))
    assert call(capsys, "run", "--config", str(cfg))[0] == 1
    cfg.write_text(json.dumps({"scenario": "window"}))
    assert call(capsys, "spectrum", "--config", str(cfg))[0] == 1


def test_every_scenario_is_reachable_from_run(tmp_path):
    configs = {
        "spectrum": {"spectrum": {"omega_range": [0, 1, 0.5], "closed_form": True}},
        "window": {"window": {"axis": [0, 0, 1]}},
        "trajectory": {"trajectory": {"t_end": 1.0, "with_boundary": True}},
        "verify-family": {"verify_family": {"grid": {"points": 256, "extent": 8.0},
                                            "t_checks": [0.5], "dt": 2e-3,
                                            "modulation": {"depth": 0.1, "frequency": 0.3}}},
        "fewbody": {"fewbody": {"interaction": "gaussian:1,1", "grid": {"points": 128,
                                                                       "extent": 8.0},
                                "k": 10, "transform_check": True}},
    }
    assert set(configs) == set(cli.COMMANDS)
    for scenario, extra in configs.items():
        out = tmp_path / f"{scenario}.out"
        cfg = {"scenario": scenario, "trap": TRAP, **extra}
        assert run(cfg, out=str(out)) == 0
        assert out.stat().st_size > 0


def test_outputs_are_byte_identical(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenario": "fewbody", "seed": 1,
                               "fewbody": {"grid": {"points": 128, "extent": 4.0}}}))
    outs = []
    for i in range(2):
        path = tmp_path / f"o{i}.json"
        assert main(["run", "--config", str(cfg), "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "comtrap.cli", "window"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["degenerate"] is True


def test_log_level_env(monkeypatch, capsys):
    monkeypatch.setenv("COMTRAP_LOG", "not-a-level")
    assert main(["window"]) == 0
