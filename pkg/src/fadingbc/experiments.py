"""Desk-scale experiment runners and scenario plumbing.

A Scenario bundles a fading ensemble, user profiles and solver knobs; the
run_* functions sweep one parameter each and return flat result rows that
serialize to a stable CSV schema (experiment, seed, sweep, metric, value).
Every run is reproducible from (config, seed): all randomness flows
through the FadingSpec streams.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import tdma_power, zf_sdma_power
from .errors import ConfigError, InfeasibleError
from .fading import FadingSpec, generate
from .scheduler import (DC, NDC, OnlineScheduler, SolverConfig, UserProfile,
                        solve_p1_offline)
from .throughput import RateProfile, delay_penalty, throughput

CSV_HEADER = "experiment,seed,sweep,metric,value"


@dataclass
class ResultRow:
    experiment: str
    seed: int
    sweep: float
    metric: str
    value: float

    def csv(self) -> str:
        return (f"{self.experiment},{self.seed},{self.sweep:.6g},"
                f"{self.metric},{self.value:.8g}")


def write_rows(path: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(row.csv() + "\n")


@dataclass
class Scenario:
    """One configured experiment: ensemble, traffic, solver, destination."""

    fading: FadingSpec
    profiles: list
    gamma: float | None = None
    p_star: float | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_path: str = "results.csv"

    def __post_init__(self) -> None:
        if self.gamma is not None and not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.p_star is not None and self.p_star <= 0:
            raise ConfigError("p_star must be positive")


def load_scenario(path: str) -> Scenario:
    """Parse an INI scenario file; raises ConfigError on any malformation."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    try:
        fad = parser["fading"]
        spec = FadingSpec(
            num_users=fad.getint("users"),
            num_antennas=fad.getint("antennas"),
            num_states=fad.getint("states", fallback=100),
            variances=tuple(float(x) for x in
                            fad.get("variances", fallback="1.0").split(",")),
            seed=fad.getint("seed", fallback=0),
        )
        profiles = []
        if parser.has_section("profiles"):
            for key, raw in parser["profiles"].items():
                if not key.startswith("user"):
                    raise ConfigError(f"profile keys look like userN, got {key!r}")
                traffic, target = raw.split()
                profiles.append(UserProfile(int(key[4:]), traffic.upper(),
                                            float(target)))
        profiles.sort(key=lambda p: p.user)
        solver = SolverConfig()
        if parser.has_section("solver"):
            fields = {f: type(getattr(solver, f)) for f in
                      ("step_mu", "step_delta", "ewma", "rate_tol",
                       "persistence", "max_outer", "max_inner")}
            for key, raw in parser["solver"].items():
                if key not in fields:
                    raise ConfigError(f"unknown solver option {key!r}")
                setattr(solver, key, fields[key](raw))
        scen = parser["scenario"] if parser.has_section("scenario") else {}
        return Scenario(
            fading=spec,
            profiles=profiles,
            gamma=float(scen["gamma"]) if "gamma" in scen else None,
            p_star=float(scen["p_star"]) if "p_star" in scen else None,
            solver=solver,
            output_path=scen.get("output", "results.csv"),
        )
    except ConfigError:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"malformed scenario file {path!r}: {exc}") from exc


def _split_classes(profiles):
    ndc = [p.user for p in profiles if p.traffic == NDC]
    dc = [p.user for p in profiles if p.traffic == DC]
    return ndc, dc


def mixed_profiles(profiles, gamma: float):
    """Rescale a mixed-traffic profile set to loading factor ``gamma``.

    Keeps the total target rate; NDC users share gamma of it equally, DC
    users the rest.
    """
    ndc, dc = _split_classes(profiles)
    if not ndc or not dc:
        raise ConfigError("mixed-traffic sweep needs both NDC and DC users")
    total = sum(p.target for p in profiles)
    out = []
    for p in profiles:
        share = gamma / len(ndc) if p.traffic == NDC else (1.0 - gamma) / len(dc)
        out.append(UserProfile(p.user, p.traffic, total * share))
    return out


def run_mixed_traffic(scenario: Scenario, gamma_grid) -> list:
    """Average power of the proposed/TDMA/ZF schemes across loading factors.

    The proposed scheduler warm-starts each grid point from the previous
    one.  Infeasible or non-converged points yield a flagged status row and
    the sweep continues.
    """
    channels = generate(scenario.fading)
    seed = scenario.fading.seed
    rows: list[ResultRow] = []
    warm: dict = {}
    for gamma in gamma_grid:
        profs = mixed_profiles(scenario.profiles, float(gamma))
        tag = float(gamma)
        try:
            res = solve_p1_offline(channels, profs, scenario.solver,
                                   keep_trace=False, **warm)
            if res.converged:
                warm = res.warm_start
                rows.append(ResultRow("mixed", seed, tag, "power_proposed",
                                      res.allocation.average_power))
            else:
                warm = {}
                rows.append(ResultRow("mixed", seed, tag, "status_proposed", 3.0))
        except InfeasibleError:
            warm = {}
            rows.append(ResultRow("mixed", seed, tag, "status_proposed", 2.0))
        for name, fn in (("tdma", tdma_power), ("zf", zf_sdma_power)):
            try:
                rows.append(ResultRow("mixed", seed, tag, f"power_{name}",
                                      fn(channels, profs)))
            except InfeasibleError:
                rows.append(ResultRow("mixed", seed, tag, f"status_{name}", 2.0))
    return rows


def run_online(scenario: Scenario, num_blocks: int) -> list:
    """Trace of running averages and multipliers over consecutive blocks."""
    rows: list[ResultRow] = []
    if num_blocks <= 0:
        return rows
    spec = replace(scenario.fading, num_states=num_blocks)
    draws = generate(spec).states
    sched = OnlineScheduler(scenario.profiles, scenario.solver)
    for t in range(num_blocks):
        sched.step(draws[t])
        for u in range(sched.num_users):
            rows.append(ResultRow("online", spec.seed, t + 1,
                                  f"rbar_{u}", float(sched.rbar[u])))
            rows.append(ResultRow("online", spec.seed, t + 1,
                                  f"mu_{u}", float(sched.mu[u])))
    return rows


def run_tradeoff(scenarios, p_grid=(2.0, 5.0, 10.0, 20.0)) -> list:
    """Expected vs delay-limited throughput across power budgets.

    ``scenarios`` holds one Scenario per network; each needs profiles whose
    targets define the rate shares (targets are normalized internally).
    """
    rows: list[ResultRow] = []
    for scenario in scenarios:
        channels = generate(scenario.fading)
        k = scenario.fading.num_users
        shares = np.asarray([p.target for p in scenario.profiles], dtype=float)
        alpha = RateProfile(tuple(shares / shares.sum()))
        label = f"K{k}"
        for p_star in p_grid:
            report = delay_penalty(channels, alpha, float(p_star),
                                   scenario.solver)
            rows.append(ResultRow("tradeoff", scenario.fading.seed,
                                  float(p_star), f"C_e_{label}", report.C_e))
            rows.append(ResultRow("tradeoff", scenario.fading.seed,
                                  float(p_star), f"C_d_{label}", report.C_d))
            rows.append(ResultRow("tradeoff", scenario.fading.seed,
                                  float(p_star), f"delay_penalty_{label}",
                                  report.delay_penalty))
    return rows


def run_fairness(scenario: Scenario, phi_grid) -> list:
    """Expected throughput against user-1's share of the sum rate."""
    channels = generate(scenario.fading)
    if scenario.fading.num_users != 2:
        raise ConfigError("fairness sweep is defined for two users")
    p_star = scenario.p_star if scenario.p_star is not None else 10.0
    rows: list[ResultRow] = []
    for phi in phi_grid:
        alpha = RateProfile((float(phi), 1.0 - float(phi)))
        c_e = throughput(channels, alpha, p_star, NDC, scenario.solver)
        rows.append(ResultRow("fairness", scenario.fading.seed, float(phi),
                              "C_e", c_e))
    return rows
