"""Command-line interface.

Subcommands: run (single oversight run), montecarlo (full experiment),
verify-bounds (check a stored run record), gen-scenario (emit a synthetic
instance), baselines (run the comparison mechanisms). Exit codes: 0 on
success, 1 on usage errors, 2 when verify-bounds finds a violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, baselines, candidates, ctop, harness, model, oversight, taco


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 instead of argparse's default 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="tacosim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single oversight run on a scenario file")
    p_run.add_argument("--scenario", required=True, help="scenario JSON file")
    p_run.add_argument("--kappa", type=float, default=1.0)
    p_run.add_argument(
        "--reserves",
        default="10",
        help="comma-separated per-agent reserves, or one value for all agents",
    )
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--solver", choices=["exhaustive", "local-search"], default="exhaustive")
    p_run.add_argument("--out", default=None, help="directory for run_record.json and rounds.csv")
    p_run.add_argument("--trace", default=None, help="write per-step broadcast JSON lines here")

    p_mc = sub.add_parser("montecarlo", help="Monte Carlo experiment")
    p_mc.add_argument("--config", default=None, help="experiment config JSON")
    p_mc.add_argument("--trials", type=int, default=None)
    p_mc.add_argument("--seed", type=int, default=None)
    p_mc.add_argument("--threads", type=int, default=None)
    p_mc.add_argument("--out", default="results", help="output directory")

    p_vb = sub.add_parser("verify-bounds", help="check a stored run record")
    p_vb.add_argument("record", help="run_record.json produced by `run`")
    p_vb.add_argument("--scenario", default=None, help="scenario file if the record has no table")
    p_vb.add_argument("--tau", type=float, default=None, help="target gap for the kappa guide")

    p_gen = sub.add_parser("gen-scenario", help="emit a synthetic instance")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--sectors", type=int, default=3)
    p_gen.add_argument("--flights", type=int, default=5)
    p_gen.add_argument("--options", type=int, default=3)
    p_gen.add_argument("--grid", type=int, default=4)
    p_gen.add_argument("--horizon", type=int, default=8)
    p_gen.add_argument("--out", default=None, help="output file (default: stdout)")

    p_bl = sub.add_parser("baselines", help="run comparison mechanisms on a scenario")
    p_bl.add_argument("--scenario", required=True)
    p_bl.add_argument("--seed", type=int, default=0)
    p_bl.add_argument("--out", default=None, help="CSV file for the baseline rows")
    return parser


def _parse_reserves(raw: str, n_agents: int) -> np.ndarray:
    values = [float(v) for v in raw.split(",") if v.strip()]
    if len(values) == 1:
        values = values * n_agents
    if len(values) != n_agents:
        raise UsageError(f"expected 1 or {n_agents} reserve values, got {len(values)}")
    return np.asarray(values)


def _cmd_run(args) -> int:
    scenario = model.load_scenario(args.scenario)
    reserves = _parse_reserves(args.reserves, scenario.n_agents)
    params = oversight.OversightParams(
        kappa=args.kappa, solver=candidates.SolverConfig(kind=args.solver)
    )
    trace = None
    trace_fh = None
    if args.trace:
        trace_fh = open(args.trace, "w", encoding="utf-8")

        def trace(msg: taco.Broadcast):
            trace_fh.write(
                json.dumps(
                    {"step": msg.step, "agent": msg.agent, "chosen": msg.chosen, "d": msg.unit}
                )
                + "\n"
            )

    try:
        record = oversight.run_oversight(scenario, reserves, params, seed=args.seed, trace=trace)
    finally:
        if trace_fh is not None:
            trace_fh.close()
    report = analysis.verify_bounds(record, scenario.full_cost_table(), args.kappa)
    print(
        f"terminated in round {record.r_term} (bound {report.round_bound}), "
        f"choice {record.final_choice}, system cost {record.rounds[-1].system_cost:.6g}, "
        f"gini {record.rounds[-1].gini:.4f}"
    )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "run_record.json", "w", encoding="utf-8") as fh:
            json.dump(
                oversight.record_to_dict(record, scenario.full_cost_table()), fh, sort_keys=True
            )
            fh.write("\n")
        with open(out / "rounds.csv", "w", newline="", encoding="utf-8") as fh:
            rows = oversight.record_csv_rows(record, run_id=Path(args.scenario).stem)
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {out / 'run_record.json'} and {out / 'rounds.csv'}")
    return 0


def _cmd_montecarlo(args) -> int:
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            config = harness.config_from_dict(json.load(fh))
    else:
        config = harness.ExperimentConfig()
    overrides = {}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    # precedence: flag > TACOSIM_THREADS > config file (results never depend on it)
    env_threads = os.environ.get("TACOSIM_THREADS")
    if args.threads is not None:
        overrides["threads"] = args.threads
    elif env_threads is not None:
        overrides["threads"] = int(env_threads)
    if overrides:
        from dataclasses import replace

        config = replace(config, **overrides)
    records = harness.run_monte_carlo(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    harness.export_results(records, "csv", out / "results.csv")
    harness.export_results(records, "json", out / "results.json")
    errors = sum(1 for r in records if r.error)
    violations = sum(len(r.bound_violations) for r in records)
    print(
        f"{len(records)} trials, {errors} errors, {violations} bound violations; "
        f"wrote {out / 'results.csv'} and {out / 'results.json'}"
    )
    return 0


def _cmd_verify_bounds(args) -> int:
    with open(args.record, encoding="utf-8") as fh:
        record, table = oversight.record_from_dict(json.load(fh))
    if table is None:
        if not args.scenario:
            raise UsageError("record has no embedded cost table; pass --scenario")
        table = model.load_scenario(args.scenario).full_cost_table()
    report = analysis.verify_bounds(record, table, record.kappa, tau=args.tau)
    checks = [
        ("round bound", report.round_bound_ok, f"r_term {report.r_term} <= {report.round_bound}"),
        (
            "optimality gap",
            report.gap_ok,
            f"{report.observed_gap:.6g} <= {report.gap_bound_at_term:.6g}",
        ),
        (
            "ledger conservation",
            report.conservation_ok,
            f"max error {report.max_conservation_error:.3g}",
        ),
        ("selection error", all(r.eta_ok for r in report.rounds), "eta <= B_max/alpha each round"),
        ("flattening", all(r.flatten_ok for r in report.rounds), "spread <= B_max/alpha each round"),
        (
            "payer transfers",
            all(r.payer_ok for r in report.rounds),
            "value <= B_max/alpha + quantum",
        ),
        ("misalignment", all(r.delta_ok for r in report.rounds), "delta <= sigma_max"),
        ("alpha bookkeeping", all(r.alpha_ok for r in report.rounds), "alpha == round"),
    ]
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    if args.tau is not None:
        print(f"kappa guide: >= {report.kappa_min_for_tau} for gap {args.tau}")
    print(f"kappa guide: <= {report.kappa_max_for_observed_rounds:.6g} for {report.r_term} rounds")
    return 0 if report.all_ok else 2


def _cmd_gen_scenario(args) -> int:
    instance = ctop.generate_scenario(
        args.sectors, args.flights, args.options, args.grid, args.horizon, args.seed
    )
    if args.out:
        ctop.save_instance(instance, args.out)
        print(f"wrote {args.out}")
    else:
        json.dump(ctop.instance_to_dict(instance), sys.stdout, sort_keys=True)
        print()
    return 0


def _cmd_baselines(args) -> int:
    scenario = model.load_scenario(args.scenario)
    results = [baselines.centralized_ctop(scenario)]
    if scenario.instance is not None:
        results.append(baselines.fcfs_ctop(scenario))
    results.append(baselines.voting(scenario, seed=args.seed))
    for r in results:
        print(f"{r.mechanism}: choice {r.choice}, system cost {r.system_cost:.6g}, gini {r.gini:.4f}")
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["mechanism", "choice", "system_cost", "gini"]
            )
            writer.writeheader()
            for r in results:
                writer.writerow(
                    {
                        "mechanism": r.mechanism,
                        "choice": r.choice,
                        "system_cost": repr(r.system_cost),
                        "gini": repr(r.gini),
                    }
                )
        print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "montecarlo": _cmd_montecarlo,
    "verify-bounds": _cmd_verify_bounds,
    "gen-scenario": _cmd_gen_scenario,
    "baselines": _cmd_baselines,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ctop.SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
