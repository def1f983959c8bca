"""Command-line front end: configure, run, and persist experiments.

Subcommands cover ensemble generation, one-off solves, the online loop,
throughput characterization, and canned desk-scale reproductions of the
headline experiments.  Exit codes: 0 success, 2 infeasible scenario,
3 non-convergence, 4 bad configuration.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from .errors import ConfigError, FadingBCError, InfeasibleError
from .experiments import (ResultRow, Scenario, load_scenario, run_fairness,
                          run_mixed_traffic, run_online, run_tradeoff,
                          write_rows)
from .fading import FadingSpec, generate, save_channels
from .scheduler import DC, NDC, SolverConfig, UserProfile, solve_p1_offline
from .throughput import (CSV_HEADER as REPORT_HEADER, RateProfile,
                         delay_penalty, theorem_bound)

GAMMA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))
PHI_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_NO_CONVERGENCE = 3
EXIT_CONFIG = 4


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fadingbc",
        description="Dynamic resource allocation on a fading downlink: "
                    "solver, baselines and experiment sweeps.")
    ap.add_argument("--config", help="scenario INI file")
    ap.add_argument("--seed", type=int, help="override ensemble seed")
    ap.add_argument("--states", type=int, help="override ensemble size")
    ap.add_argument("--out", help="override output path")
    ap.add_argument("--quiet", action="store_true", help="suppress progress")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("gen", help="generate and save a channel ensemble")
    sub.add_parser("solve", help="offline power minimization for a scenario")
    online = sub.add_parser("online", help="block-by-block online scheduling")
    online.add_argument("--blocks", type=int, default=3000)
    sub.add_parser("throughput", help="expected/delay-limited throughput report")
    sub.add_parser("penalty", help="delay penalty across power budgets")
    sub.add_parser("fairness", help="throughput vs rate share sweep")
    sub.add_parser("baseline", help="TDMA and ZF powers for the scenario")
    repro = sub.add_parser("repro", help="desk-scale reproduction presets")
    repro.add_argument("figure",
                       choices=["fig5", "fig6", "fig7", "fig9", "fig10"])
    return ap


def _say(args, text: str) -> None:
    if not args.quiet:
        print(text)


def _default_mixed(seed: int, states: int, total_rate: float) -> Scenario:
    per_user = total_rate / 4.0
    return Scenario(
        fading=FadingSpec(4, 4, states, (1.0,), seed),
        profiles=[UserProfile(0, NDC, per_user), UserProfile(1, NDC, per_user),
                  UserProfile(2, DC, per_user), UserProfile(3, DC, per_user)],
    )


def _scenario(args, fallback) -> Scenario:
    scen = load_scenario(args.config) if args.config else fallback()
    if scen is None:
        raise ConfigError("this command needs --config")
    spec = scen.fading
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.states is not None:
        spec = replace(spec, num_states=args.states)
    scen.fading = spec
    if args.out:
        scen.output_path = args.out
    return scen


def _cmd_gen(args) -> int:
    scen = _scenario(args, lambda: _default_mixed(0, 100, 6.0))
    path = scen.output_path if scen.output_path != "results.csv" else "channels.npz"
    if args.out:
        path = args.out
    save_channels(generate(scen.fading), path)
    _say(args, f"wrote {scen.fading.num_states} states to {path}")
    return EXIT_OK


def _cmd_solve(args) -> int:
    scen = _scenario(args, lambda: _default_mixed(0, 100, 6.0))
    channels = generate(scen.fading)
    res = solve_p1_offline(channels, scen.profiles, scen.solver,
                           keep_trace=False)
    rows = [ResultRow("solve", scen.fading.seed, 0.0, "power",
                      res.allocation.average_power)]
    for prof in scen.profiles:
        rows.append(ResultRow("solve", scen.fading.seed, 0.0,
                              f"rate_{prof.user}",
                              float(res.allocation.average_rates[prof.user])))
    write_rows(scen.output_path, rows)
    _say(args, f"power {res.allocation.average_power:.4f}, "
               f"converged={res.converged} -> {scen.output_path}")
    return EXIT_OK if res.converged else EXIT_NO_CONVERGENCE


def _fig7_scenario(seed: int, states: int) -> Scenario:
    return Scenario(
        fading=FadingSpec(2, 4, max(states, 1), (1.0,), seed),
        profiles=[UserProfile(0, NDC, 3.0), UserProfile(1, NDC, 1.0)],
        solver=SolverConfig(step_mu=0.01, step_delta=0.05, ewma=0.01),
    )


def _cmd_online(args, blocks: int) -> int:
    scen = _scenario(args, lambda: _fig7_scenario(0, 100))
    rows = run_online(scen, blocks)
    write_rows(scen.output_path, rows)
    if rows:
        last = {r.metric: r.value for r in rows if r.sweep == blocks}
        _say(args, f"final averages: " +
             ", ".join(f"{m}={v:.3f}" for m, v in sorted(last.items())))
    return EXIT_OK


def _profile_shares(profiles) -> RateProfile:
    t = np.asarray([p.target for p in profiles], dtype=float)
    return RateProfile(tuple(t / t.sum()))


def _cmd_throughput(args) -> int:
    scen = _scenario(args, lambda: _tradeoff_scenarios(0, 100)[0])
    p_star = scen.p_star if scen.p_star is not None else 10.0
    channels = generate(scen.fading)
    report = delay_penalty(channels, _profile_shares(scen.profiles), p_star,
                           scen.solver)
    report.theorem_bound = theorem_bound(p_star, scen.fading.num_users, 1.0)
    with open(scen.output_path, "w") as fh:
        fh.write(REPORT_HEADER + "\n" + report.csv_row() + "\n")
    _say(args, f"C_e={report.C_e:.4f} C_d={report.C_d:.4f} -> {scen.output_path}")
    return EXIT_OK


def _tradeoff_scenarios(seed: int, states: int):
    two = Scenario(
        fading=FadingSpec(2, 2, states, (1.0,), seed),
        profiles=[UserProfile(0, NDC, 2 / 3), UserProfile(1, NDC, 1 / 3)])
    four = Scenario(
        fading=FadingSpec(4, 2, states, (1.0,), seed),
        profiles=[UserProfile(0, NDC, 2 / 6), UserProfile(1, NDC, 2 / 6),
                  UserProfile(2, NDC, 1 / 6), UserProfile(3, NDC, 1 / 6)])
    return two, four


def _cmd_penalty(args) -> int:
    scen = _scenario(args, lambda: _tradeoff_scenarios(0, 100)[0])
    rows = run_tradeoff([scen])
    write_rows(scen.output_path, rows)
    _say(args, f"{len(rows)} rows -> {scen.output_path}")
    return EXIT_OK


def _fig10_scenario(seed: int, states: int, variances) -> Scenario:
    return Scenario(
        fading=FadingSpec(2, 2, states, variances, seed),
        profiles=[UserProfile(0, NDC, 0.5), UserProfile(1, NDC, 0.5)],
        p_star=10.0)


def _cmd_fairness(args) -> int:
    scen = _scenario(args, lambda: _fig10_scenario(0, 100, (1.0,)))
    rows = run_fairness(scen, PHI_GRID)
    write_rows(scen.output_path, rows)
    best = max(rows, key=lambda r: r.value)
    _say(args, f"argmax C_e at phi={best.sweep:.2f} -> {scen.output_path}")
    return EXIT_OK


def _cmd_baseline(args) -> int:
    from .baselines import tdma_power, zf_sdma_power
    scen = _scenario(args, lambda: _default_mixed(0, 100, 6.0))
    channels = generate(scen.fading)
    rows = []
    for name, fn in (("tdma", tdma_power), ("zf", zf_sdma_power)):
        try:
            rows.append(ResultRow("baseline", scen.fading.seed, 0.0,
                                  f"power_{name}", fn(channels, scen.profiles)))
        except InfeasibleError:
            rows.append(ResultRow("baseline", scen.fading.seed, 0.0,
                                  f"status_{name}", 2.0))
    write_rows(scen.output_path, rows)
    _say(args, ", ".join(f"{r.metric}={r.value:.4f}" for r in rows))
    return EXIT_OK


def _cmd_repro(args, figure: str) -> int:
    states = args.states if args.states is not None else 100
    base_seed = args.seed if args.seed is not None else 0
    out = args.out or f"{figure}.csv"
    if figure in ("fig5", "fig6"):
        total = 6.0 if figure == "fig5" else 2.0
        rows = []
        for s in range(base_seed, base_seed + 20):
            _say(args, f"seed {s} ...")
            scen = _default_mixed(s, states, total)
            rows += run_mixed_traffic(scen, GAMMA_GRID)
        write_rows(out, rows)
    elif figure == "fig7":
        scen = _fig7_scenario(base_seed, states)
        rows = run_online(scen, 3000)
        write_rows(out, rows)
    elif figure == "fig9":
        rows = run_tradeoff(_tradeoff_scenarios(base_seed, states))
        write_rows(out, rows)
    else:
        rows = []
        for tag, variances in (("sym", (1.0,)), ("asym", (2.0, 0.5))):
            scen = _fig10_scenario(base_seed, states, variances)
            got = run_fairness(scen, PHI_GRID)
            for r in got:
                r.metric = f"C_e_{tag}"
            rows += got
        write_rows(out, rows)
    _say(args, f"{len(rows)} rows -> {out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "online":
            return _cmd_online(args, args.blocks)
        if args.command == "throughput":
            return _cmd_throughput(args)
        if args.command == "penalty":
            return _cmd_penalty(args)
        if args.command == "fairness":
            return _cmd_fairness(args)
        if args.command == "baseline":
            return _cmd_baseline(args)
        return _cmd_repro(args, args.figure)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except FadingBCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
