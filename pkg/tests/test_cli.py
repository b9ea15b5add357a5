import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from darksoliton.cli import main
from darksoliton.gray import local_eta


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path / "run")])


def read_profile(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def test_solve_gray_contact(tmp_path):
    assert run(tmp_path, "solve-gray", "--family", "contact", "--speed", "0.7") == 0
    prof = read_profile(tmp_path / "run.profile.csv")
    assert list(prof) == ["x", "eta", "theta", "u_re", "u_im"]
    assert np.max(np.abs(prof["eta"] - local_eta(prof["x"], 0.7))) < 1e-8
    report = json.loads((tmp_path / "run.report.json").read_text())
    assert report["solve"]["converged"]
    manifest = json.loads((tmp_path / "run.manifest.json").read_text())
    assert manifest["config"]["speed"] == 0.7 and manifest["exit_code"] == 0


def test_supersonic_rejected(tmp_path, capsys):
    assert run(tmp_path, "solve-gray", "--speed", "1.5") == 1
    assert "speed" in capsys.readouterr().err


@pytest.mark.parametrize("args", [["solve-gray", "--speed", "0.5", "--points", "1000"],
                                  ["solve-gray", "--speed", "0.5", "--tol", "0"],
                                  ["solve-black", "--speed", "0.3"],
                                  ["solve-gray", "--family", "gaussian", "--speed", "0.5"],
                                  ["sweep", "--family", "gaussian", "--speed", "0.5"]])
def test_invalid_configs(tmp_path, args):
    assert run(tmp_path, *args) == 1


def test_check_reports_m(tmp_path):
    assert run(tmp_path, "check", "--family", "gaussian", "--lambda", "0.5", "--speed", "1.0") == 0
    report = json.loads((tmp_path / "run.report.json").read_text())
    assert report["hypotheses"]["m"] == 0.5


def test_non_convergence_exit_code_and_outputs(tmp_path):
    code = run(tmp_path, "solve-gray", "--family", "gaussian", "--lambda", "0.5", "--speed", "0.5",
               "--max-iter", "1")
    assert code == 2
    report = json.loads((tmp_path / "run.report.json").read_text())
    assert "error" in report
    assert json.loads((tmp_path / "run.manifest.json").read_text())["exit_code"] == 2


def test_solve_black_and_oscillation(tmp_path):
    assert run(tmp_path, "solve-black", "--family", "vanderwaals", "--lambda", "0.2", "--beta", "0.5") == 0
    prof = read_profile(tmp_path / "run.profile.csv")
    assert np.all(prof["theta"] == 0) and np.all(prof["u_im"] == 0)
    assert main(["oscillation", "--profile-file", str(tmp_path / "run.profile.csv"),
                 "--out", str(tmp_path / "osc")]) == 0
    osc = json.loads((tmp_path / "osc.report.json").read_text())
    assert osc["u_nondecreasing"] is True


def test_oscillation_recovers_speed(tmp_path):
    assert run(tmp_path, "solve-gray", "--speed", "0.9") == 0
    from darksoliton.io import read_profile_csv

    p = read_profile_csv(tmp_path / "run.profile.csv")
    assert p.c == pytest.approx(0.9, abs=1e-6)


def test_sweep_outputs(tmp_path):
    assert run(tmp_path, "sweep", "--family", "gaussian", "--speed", "0.5", "--lambdas", "0.2,0.1") == 0
    with open(tmp_path / "run.sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["lambda", "distance_eta", "distance_u", "energy", "residual"]
    assert float(rows[0]["distance_eta"]) > float(rows[1]["distance_eta"])


def test_parallel_sweep_matches_serial(tmp_path):
    args = ["sweep", "--family", "gaussian", "--black", "--lambdas", "0.2,0.1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--workers", "2", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a.sweep.csv").read_bytes() == (tmp_path / "b.sweep.csv").read_bytes()


def test_thresholds_command(tmp_path):
    assert run(tmp_path, "thresholds", "--family", "nematic", "--speed", "0") == 0
    report = json.loads((tmp_path / "run.report.json").read_text())
    assert report["lambda_tilde_c"] == pytest.approx(1 / math.sqrt(8), abs=1e-15)


def test_outputs_are_deterministic(tmp_path):
    for stem in ("a", "b"):
        assert main(["solve-gray", "--family", "gaussian", "--lambda", "0.3", "--speed", "0.6",
                     "--out", str(tmp_path / stem)]) == 0
    for suffix in ("profile.csv", "report.json"):
        assert (tmp_path / f"a.{suffix}").read_bytes() == (tmp_path / f"b.{suffix}").read_bytes()


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"family": "gaussian", "lambda": 0.3, "speed": 0.6, "points": 2048}))
    assert run(tmp_path, "solve-gray", "--config", str(cfg), "--speed", "0.8") == 0
    resolved = json.loads((tmp_path / "run.manifest.json").read_text())["config"]
    assert resolved["speed"] == 0.8 and resolved["lam"] == 0.3 and resolved["points"] == 2048


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"colour": "blue"}))
    assert run(tmp_path, "check", "--config", str(cfg)) == 1


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "darksoliton", "thresholds", "--family", "gaussian",
                          "--out", str(tmp_path / "t")], capture_output=True, text=True)
    assert out.returncode == 0
    assert "lambda_tilde_c" in out.stdout
