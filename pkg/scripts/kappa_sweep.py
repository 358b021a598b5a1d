#!/usr/bin/env python3
"""Sweep the taxation parameter on one scenario and print the trade-off
between convergence speed and outcome quality.

For each kappa on a log grid, runs the oversight loop with fixed reserves
and reports rounds used vs the round bound, the optimality gap vs its
bound, and the final Gini index.

Usage:
    python scripts/kappa_sweep.py [--scenario FILE] [--reserves R] [--points N]
"""

import argparse
import sys

import numpy as np

from tacosim import analysis, harness, model, oversight


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", default=None, help="scenario file (default: built-in)")
    parser.add_argument("--reserves", type=float, default=10.0)
    parser.add_argument("--points", type=int, default=13)
    args = parser.parse_args(argv)

    if args.scenario:
        scenario = model.load_scenario(args.scenario)
    else:
        scenario = harness.build_scenario(harness.ExperimentConfig())
    table = scenario.full_cost_table()
    bmax, _ = analysis.b_max(table)
    _, opt_cost = analysis.system_optimum(table)
    reserves = np.full(scenario.n_agents, args.reserves)

    print(f"B_max = {bmax:.4f}, system optimum = {opt_cost:.4f}")
    print(f"{'kappa':>10} {'rounds':>6} {'bound':>6} {'gap':>9} {'gap_bound':>9} {'gini':>7}")
    for kappa in np.logspace(-1, 2, args.points):
        record = oversight.run_oversight(
            scenario, reserves, oversight.OversightParams(kappa=float(kappa))
        )
        report = analysis.verify_bounds(record, table, float(kappa))
        final = record.rounds[-1]
        print(
            f"{kappa:10.3f} {record.r_term:6d} {report.round_bound:6d} "
            f"{report.observed_gap:9.4f} {report.gap_bound_at_term:9.4f} {final.gini:7.4f}"
        )
        if report.violations:
            print(f"  !! bound violations: {report.violations}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
