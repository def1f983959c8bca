import subprocess
import sys

import pytest

CLI = [sys.executable, "-m", "fadingbc.cli"]

SCEN = """\
[fading]
users = 2
antennas = 2
states = 10
seed = 4

[profiles]
user0 = NDC 0.8
user1 = DC 0.5

[scenario]
output = run.csv
"""


def run_cli(args, cwd):
    return subprocess.run(CLI + args, cwd=cwd, capture_output=True, text=True,
                          timeout=480)


def read_csv(path):
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "experiment,seed,sweep,metric,value"
    return [ln.split(",") for ln in lines[1:]]


def test_gen_deterministic(tmp_path):
    for name in ("a.txt", "b.txt"):
        res = run_cli(["--seed", "9", "--states", "7", "--out", name, "gen"],
                      cwd=tmp_path)
        assert res.returncode == 0, res.stderr
    assert (tmp_path / "a.txt").read_text() == (tmp_path / "b.txt").read_text()

    res = run_cli(["--seed", "10", "--states", "7", "--out", "c.txt", "gen"],
                  cwd=tmp_path)
    assert res.returncode == 0
    assert (tmp_path / "c.txt").read_text() != (tmp_path / "a.txt").read_text()


def test_solve_with_config(tmp_path):
    (tmp_path / "scen.ini").write_text(SCEN)
    res = run_cli(["--config", "scen.ini", "solve"], cwd=tmp_path)
    assert res.returncode == 0, res.stderr
    rows = read_csv(tmp_path / "run.csv")
    metrics = {r[3]: float(r[4]) for r in rows}
    assert metrics["power"] > 0
    assert abs(metrics["rate_0"] - 0.8) < 2e-2
    assert abs(metrics["rate_1"] - 0.5) < 2e-2


def test_solve_quiet_silences_stdout(tmp_path):
    (tmp_path / "scen.ini").write_text(SCEN)
    res = run_cli(["--config", "scen.ini", "--quiet", "solve"], cwd=tmp_path)
    assert res.returncode == 0
    assert res.stdout.strip() == ""


def test_solve_non_convergence_exit_code(tmp_path):
    starved = SCEN + "\n[solver]\nmax_outer = 2\n"
    (tmp_path / "scen.ini").write_text(starved)
    res = run_cli(["--config", "scen.ini", "solve"], cwd=tmp_path)
    assert res.returncode == 3


def test_infeasible_exit_code(tmp_path):
    # one antenna, one state, 30-bit average target: needs 2^30 >> power cap
    scen = """\
[fading]
users = 1
antennas = 1
states = 1
seed = 0

[profiles]
user0 = NDC 30.0
"""
    (tmp_path / "scen.ini").write_text(scen)
    res = run_cli(["--config", "scen.ini", "solve"], cwd=tmp_path)
    assert res.returncode == 2


def test_config_error_exit_code(tmp_path):
    (tmp_path / "scen.ini").write_text("[fading]\nusers = banana\n")
    res = run_cli(["--config", "scen.ini", "solve"], cwd=tmp_path)
    assert res.returncode == 4

    res = run_cli(["--config", "missing.ini", "solve"], cwd=tmp_path)
    assert res.returncode == 4


def test_online_rows(tmp_path):
    (tmp_path / "scen.ini").write_text(SCEN)
    res = run_cli(["--config", "scen.ini", "online", "--blocks", "20"],
                  cwd=tmp_path)
    assert res.returncode == 0, res.stderr
    rows = read_csv(tmp_path / "run.csv")
    assert any(r[3] == "rbar_0" for r in rows)
    assert any(r[3] == "mu_1" for r in rows)


def test_baseline_rows(tmp_path):
    (tmp_path / "scen.ini").write_text(SCEN)
    res = run_cli(["--config", "scen.ini", "baseline"], cwd=tmp_path)
    assert res.returncode == 0, res.stderr
    rows = read_csv(tmp_path / "run.csv")
    metrics = {r[3] for r in rows}
    assert "power_tdma" in metrics
    assert "power_zf" in metrics
