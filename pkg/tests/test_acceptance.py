"""Acceptance suite: the analytical bounds and qualitative relationships,
checked over 1,000 seeded desk-scale trials on the shared synthetic
scenario (3 sectors, 5 flights, 3 options, reserves ~ Unif(1, 20),
kappa = 10^Unif(-1, 2)).

Each criterion prints one PASS/FAIL line (run with -s to see them all).
Bound comparisons are exact up to float-noise guards already built into
verify_bounds; no criterion is loosened beyond its stated tolerance.
"""

import numpy as np
import pytest

from tacosim import analysis, candidates, ctop, harness, oversight


@pytest.fixture(scope="module")
def mc(desk_config):
    """The shared 1,000-trial Monte Carlo, run once at parallelism 8."""
    return harness.run_monte_carlo(desk_config)


@pytest.fixture(scope="module")
def desk_table(desk_scenario):
    return desk_scenario.full_cost_table()


def _report(criterion: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")


def test_01_termination_and_round_bound(mc):
    errors = [r for r in mc if r.error]
    over = [r for r in mc if not r.error and r.r_term > r.r_bound]
    ok = not errors and not over
    _report(
        "1 termination/round-bound",
        ok,
        f"{len(mc)} trials, {len(errors)} failures, {len(over)} round-bound violations",
    )
    assert ok


def test_02_optimality_gap_bound(mc):
    bad = [
        r for r in mc
        if not r.error and any("optimality gap" in v for v in r.bound_violations)
    ]
    gaps = [r.gap for r in mc if not r.error]
    ok = not bad
    _report(
        "2 optimality-gap bound",
        ok,
        f"max gap {max(gaps):.4g}, violations {len(bad)}",
    )
    assert ok


def test_03_selection_error_bound(mc):
    bad = [
        r for r in mc
        if not r.error and any("selection-error" in v for v in r.bound_violations)
    ]
    ok = not bad
    _report("3 selection-error bound", ok, f"violations {len(bad)}")
    assert ok


def test_04_flattening_bound(mc):
    bad = [
        r for r in mc
        if not r.error and any("flattening" in v for v in r.bound_violations)
    ]
    ok = not bad
    _report("4 effective-cost flattening", ok, f"violations {len(bad)}")
    assert ok


def test_05_conservation_and_payer_rationality(mc, desk_config, desk_scenario, desk_table):
    payer_bad = [
        r for r in mc
        if not r.error and any("payer-transfer" in v for v in r.bound_violations)
    ]
    # conservation needs the raw per-update maximum, re-checked on a sample
    # of re-run records plus the per-trial aggregate flags
    cons_bad = [
        r for r in mc
        if not r.error and any("conservation" in v for v in r.bound_violations)
    ]
    worst = 0.0
    for trial in range(0, len(mc), 97):
        params = harness._sample(desk_config, trial, desk_scenario.n_agents)
        record = oversight.run_oversight(
            desk_scenario,
            np.asarray(params.reserves),
            oversight.OversightParams(kappa=params.kappa),
            seed=params.solver_seed,
        )
        worst = max(
            worst, max(e.outcome.max_conservation_error for e in record.rounds)
        )
    ok = not payer_bad and not cons_bad and worst <= 1e-9
    _report(
        "5 conservation/payer bound",
        ok,
        f"payer violations {len(payer_bad)}, conservation violations {len(cons_bad)}, "
        f"worst sampled ledger error {worst:.2g}",
    )
    assert ok


def test_06_kappa_rate_relationship(mc):
    ok_records = [r for r in mc if not r.error]
    kappas = np.array([r.kappa for r in ok_records])
    rterms = np.array([r.r_term for r in ok_records], dtype=float)
    rho = analysis.spearman(kappas, rterms)
    q1, q3 = np.quantile(kappas, [0.25, 0.75])
    bottom_rate = float(np.mean(rterms[kappas <= q1] == 1))
    top_rate = float(np.mean(rterms[kappas >= q3] == 1))
    ok = rho > 0 and bottom_rate > top_rate
    _report(
        "6 kappa-rate relationship",
        ok,
        f"spearman {rho:.3f}, single-round rate bottom {bottom_rate:.3f} vs top {top_rate:.3f}",
    )
    assert ok


def test_07_improvement_direction(mc):
    multi = [r for r in mc if not r.error and r.r_term > 1]
    cost_med = float(np.median([r.cost_ratio for r in multi]))
    gini_med = float(np.median([r.gini_ratio for r in multi]))
    ok = len(multi) > 0 and cost_med <= 1.0 and gini_med <= 1.0
    _report(
        "7 improvement direction",
        ok,
        f"{len(multi)} multi-round trials, median cost ratio {cost_med:.3f}, "
        f"median gini ratio {gini_med:.3f}",
    )
    assert ok


def test_08_baseline_ordering(mc, desk_table):
    ok_records = [r for r in mc if not r.error]
    q3 = np.quantile([r.kappa for r in ok_records], 0.75)
    top = [r for r in ok_records if r.kappa >= q3]
    oversight_mean = float(np.mean([r.cost_final for r in top]))
    voting_mean = float(np.mean([r.baseline_costs["voting"] for r in top]))
    central = ok_records[0].baseline_costs["c-ctop"]
    _, opt_cost = analysis.system_optimum(desk_table)
    ok = central == opt_cost and central <= oversight_mean <= voting_mean
    _report(
        "8 baseline ordering",
        ok,
        f"c-ctop {central:.4f} <= oversight(top-kappa) {oversight_mean:.4f} "
        f"<= voting {voting_mean:.4f}; c-ctop exact {central == opt_cost}",
    )
    assert ok


def test_09_oracle_equivalence():
    # local search vs exhaustive: exact on separable objectives
    rng = np.random.default_rng(100)
    separable_hits = 0
    for trial in range(100):
        terms = rng.uniform(0, 5, size=(4, 3))

        def cost(c, terms=terms):
            digits = ctop.decode_bundle(c, 3, 4)
            return sum(terms[f][d] for f, d in enumerate(digits))

        _, ex_val = candidates.exhaustive_min(cost, 3**4)
        _, ls_val = candidates.local_search_min(
            cost, [3] * 4, candidates.SolverConfig(kind="local-search", restarts=1, seed=trial)
        )
        if ls_val == pytest.approx(ex_val, abs=1e-12):
            separable_hits += 1
    # coupled objectives: within 5% on at least 90 of 100 instances
    coupled_hits = 0
    for trial in range(100):
        vals = rng.uniform(1, 10, 5**5)
        _, ex_val = candidates.exhaustive_min(lambda c: vals[c], 5**5)
        _, ls_val = candidates.local_search_min(
            lambda c: vals[c],
            [5] * 5,
            candidates.SolverConfig(kind="local-search", restarts=30, seed=trial),
        )
        if ls_val <= 1.05 * ex_val:
            coupled_hits += 1
    # power iteration vs full eigendecomposition on small covariances
    eig_ok = True
    worst_rel = 0.0
    for trial in range(100):
        g = int(rng.integers(2, 5))
        t = int(rng.integers(2, 12))
        x = rng.integers(0, 4, size=(t, g * g)).astype(float)
        lam = ctop.eigen_complexity(x)
        xc = x - x.mean(axis=0)
        expected = float(np.linalg.eigvalsh(xc.T @ xc / t)[-1])
        if expected > 0:
            worst_rel = max(worst_rel, abs(lam - expected) / expected)
            eig_ok = eig_ok and abs(lam - expected) <= 1e-6 * expected
        else:
            eig_ok = eig_ok and lam == 0.0
    ok = separable_hits == 100 and coupled_hits >= 90 and eig_ok
    _report(
        "9 oracle equivalence",
        ok,
        f"separable {separable_hits}/100 exact, coupled {coupled_hits}/100 within 5%, "
        f"power-iteration worst rel err {worst_rel:.2g}",
    )
    assert ok


def test_10_reproducibility_across_parallelism(mc, desk_config, tmp_path):
    from dataclasses import replace

    serial = harness.run_monte_carlo(replace(desk_config, threads=1))
    path_a = tmp_path / "parallel.csv"
    path_b = tmp_path / "serial.csv"
    harness.export_results(mc, "csv", path_a)
    harness.export_results(serial, "csv", path_b)
    ok = path_a.read_bytes() == path_b.read_bytes()
    _report(
        "10 reproducibility",
        ok,
        f"sorted CSVs identical across parallelism 1 vs {desk_config.threads}: {ok}",
    )
    assert ok
