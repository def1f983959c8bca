import numpy as np
import pytest

from fadingbc.errors import ConfigError
from fadingbc.experiments import (
    CSV_HEADER,
    ResultRow,
    Scenario,
    load_scenario,
    mixed_profiles,
    run_fairness,
    run_mixed_traffic,
    run_online,
    run_tradeoff,
    write_rows,
)
from fadingbc.fading import FadingSpec
from fadingbc.scheduler import DC, NDC, SolverConfig, UserProfile

INI = """\
[fading]
users = 2
antennas = 2
states = 12
variances = 1.0, 0.5
seed = 3

[profiles]
user0 = NDC 1.0
user1 = DC 0.5

[solver]
rate_tol = 0.02
max_outer = 300

[scenario]
gamma = 0.4
p_star = 8.0
output = out.csv
"""


def tiny_scenario(n=10, seed=0):
    return Scenario(
        fading=FadingSpec(2, 2, n, (1.0,), seed),
        profiles=[UserProfile(0, NDC, 0.8), UserProfile(1, DC, 0.6)],
    )


def test_load_scenario_round_trip(tmp_path):
    path = tmp_path / "scen.ini"
    path.write_text(INI)
    scen = load_scenario(str(path))
    assert scen.fading.num_users == 2
    assert scen.fading.num_states == 12
    assert scen.fading.variances == (1.0, 0.5)
    assert scen.profiles[0].traffic == NDC
    assert scen.profiles[1] == UserProfile(1, DC, 0.5)
    assert scen.solver.rate_tol == 0.02
    assert scen.solver.max_outer == 300
    assert scen.gamma == 0.4
    assert scen.p_star == 8.0
    assert scen.output_path == "out.csv"


def test_load_scenario_rejects_unknown_solver_key(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text(INI.replace("rate_tol = 0.02", "turbo = yes"))
    with pytest.raises(ConfigError):
        load_scenario(str(path))


def test_load_scenario_rejects_bad_profile_key(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text(INI.replace("user0 =", "client0 ="))
    with pytest.raises(ConfigError):
        load_scenario(str(path))


def test_load_scenario_missing_file():
    with pytest.raises(ConfigError):
        load_scenario("/nonexistent/scenario.ini")


def test_scenario_validation():
    with pytest.raises(ConfigError):
        Scenario(fading=FadingSpec(1, 1, 1), profiles=[], gamma=1.5)
    with pytest.raises(ConfigError):
        Scenario(fading=FadingSpec(1, 1, 1), profiles=[], p_star=-2.0)


def test_mixed_profiles_preserves_total():
    base = [UserProfile(0, NDC, 1.0), UserProfile(1, NDC, 1.0),
            UserProfile(2, DC, 2.0), UserProfile(3, DC, 2.0)]
    for gamma in (0.0, 0.3, 0.5, 1.0):
        mixed = mixed_profiles(base, gamma)
        total = sum(p.target for p in mixed)
        assert abs(total - 6.0) < 1e-12
        ndc_share = sum(p.target for p in mixed if p.traffic == NDC)
        assert abs(ndc_share - gamma * 6.0) < 1e-12
        # class structure is preserved, only targets move
        assert [p.traffic for p in mixed] == [NDC, NDC, DC, DC]
        ndc_targets = [p.target for p in mixed if p.traffic == NDC]
        assert abs(ndc_targets[0] - ndc_targets[1]) < 1e-12


def test_result_row_csv():
    row = ResultRow("mixed", 3, 0.4, "power_proposed", 1.25)
    assert row.csv() == "mixed,3,0.4,power_proposed,1.25"
    assert CSV_HEADER == "experiment,seed,sweep,metric,value"


def test_write_rows(tmp_path):
    path = tmp_path / "rows.csv"
    rows = [ResultRow("a", 0, 0.1, "m", 1.0), ResultRow("b", 1, 0.2, "n", 2.0)]
    write_rows(str(path), rows)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == CSV_HEADER
    assert len(lines) == 3


def test_run_mixed_traffic_rows():
    scen = tiny_scenario()
    rows = run_mixed_traffic(scen, gamma_grid=(0.3, 0.6))
    metrics = {(r.sweep, r.metric): r.value for r in rows}
    for g in (0.3, 0.6):
        assert (g, "power_proposed") in metrics
        assert (g, "power_tdma") in metrics
        assert (g, "power_zf") in metrics
        assert metrics[(g, "power_proposed")] <= metrics[(g, "power_tdma")] + 1e-2
        assert metrics[(g, "power_proposed")] <= metrics[(g, "power_zf")] + 1e-2


def test_run_mixed_traffic_reproducible():
    rows_a = run_mixed_traffic(tiny_scenario(), gamma_grid=(0.5,))
    rows_b = run_mixed_traffic(tiny_scenario(), gamma_grid=(0.5,))
    assert [r.csv() for r in rows_a] == [r.csv() for r in rows_b]


def test_run_online_rows():
    scen = tiny_scenario()
    rows = run_online(scen, num_blocks=25)
    assert rows
    rbar_rows = [r for r in rows if r.metric == "rbar_0"]
    assert len(rbar_rows) == 25
    assert rbar_rows[-1].sweep == 25
    assert run_online(scen, num_blocks=0) == []


def test_run_tradeoff_rows():
    scen = Scenario(
        fading=FadingSpec(2, 2, 8, (1.0,), 1),
        profiles=[UserProfile(0, NDC, 2.0), UserProfile(1, NDC, 1.0)],
    )
    rows = run_tradeoff([scen], p_grid=(4.0,))
    vals = {r.metric: r.value for r in rows}
    assert vals["C_e_K2"] >= vals["C_d_K2"] - 1e-3
    assert abs(vals["delay_penalty_K2"] - (vals["C_e_K2"] - vals["C_d_K2"])) < 1e-12


def test_run_fairness_rows():
    scen = Scenario(
        fading=FadingSpec(2, 2, 10, (1.0,), 2),
        profiles=[UserProfile(0, NDC, 1.0), UserProfile(1, NDC, 1.0)],
        p_star=6.0,
    )
    rows = run_fairness(scen, phi_grid=(0.4, 0.6))
    assert {r.sweep for r in rows} == {0.4, 0.6}
    assert all(r.metric == "C_e" for r in rows)
    assert all(r.value > 0 for r in rows)


def test_run_fairness_requires_two_users():
    scen = Scenario(
        fading=FadingSpec(3, 2, 4, (1.0,), 0),
        profiles=[UserProfile(u, NDC, 1.0) for u in range(3)],
    )
    with pytest.raises(ConfigError):
        run_fairness(scen, phi_grid=(0.5,))
