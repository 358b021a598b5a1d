"""Monte Carlo experiment runner.

One scenario is held fixed across trials while reserves and the taxation
parameter are sampled per trial: reserves uniform in a range, kappa
log-uniform via a uniform exponent. Every trial is reproducible in
isolation from (master seed, trial id) and trials are independent, so the
parallelism level cannot change any result.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import analysis, baselines, candidates, model, oversight, taco

CSV_COLUMNS = [
    "trial",
    "kappa",
    "b_mean",
    "r_term",
    "r_bound",
    "cost_first",
    "cost_final",
    "cost_ratio",
    "gini_first",
    "gini_final",
    "gini_ratio",
    "gap",
    "gap_bound",
    "mechanism",
]


@dataclass(frozen=True)
class ScenarioSource:
    """Either generator parameters or a file path."""

    kind: str = "ctop"  # "ctop" | "table" | "file"
    sectors: int = 3
    flights: int = 5
    options: int = 3
    grid: int = 4
    horizon: int = 8
    seed: int = 27
    path: str | None = None
    costs: list | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    trials: int = 1000
    master_seed: int = 2024
    scenario: ScenarioSource = field(default_factory=ScenarioSource)
    reserve_range: tuple[float, float] = (1.0, 20.0)
    kappa_exponent_range: tuple[float, float] = (-1.0, 2.0)
    solver: candidates.SolverConfig = field(default_factory=candidates.SolverConfig)
    taco: taco.TacoParams = field(default_factory=taco.TacoParams)
    threads: int = 1
    run_baselines: bool = True

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.reserve_range[0] <= 0:
            raise ValueError("reserve range must be strictly positive")
        if self.kappa_exponent_range[0] >= self.kappa_exponent_range[1]:
            raise ValueError("kappa exponent range must be nondegenerate")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass(frozen=True)
class TrialParams:
    reserves: tuple[float, ...]
    kappa: float
    solver_seed: int
    voting_seed: int


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    kappa: float
    reserves: tuple[float, ...]
    b_mean: float
    r_term: int
    r_bound: int
    cost_first: float
    cost_final: float
    gini_first: float
    gini_final: float
    gap: float
    gap_bound: float
    agreed_choice: int
    bound_violations: tuple[str, ...]
    baseline_costs: dict
    wall_time: float
    error: str | None = None

    @property
    def cost_ratio(self) -> float:
        return _ratio(self.cost_final, self.cost_first)

    @property
    def gini_ratio(self) -> float:
        return _ratio(self.gini_final, self.gini_first)


def _ratio(final: float, first: float) -> float:
    if first > 0:
        return final / first
    return 1.0 if final == first else float("inf")


def sample_trial_params(config: ExperimentConfig, trial_id: int) -> TrialParams:
    """Draws for one trial, a pure function of (master seed, trial id).

    Draw order is fixed: reserves first, then the kappa exponent, then the
    derived integer seeds.
    """
    scenario = build_scenario(config)  # agent count comes from the scenario
    return _sample(config, trial_id, scenario.n_agents)


def _sample(config: ExperimentConfig, trial_id: int, n_agents: int) -> TrialParams:
    rng = np.random.default_rng([config.master_seed, trial_id])
    lo, hi = config.reserve_range
    reserves = tuple(float(r) for r in rng.uniform(lo, hi, n_agents))
    k_lo, k_hi = config.kappa_exponent_range
    kappa = float(10.0 ** rng.uniform(k_lo, k_hi))
    solver_seed = int(rng.integers(0, 2**31))
    voting_seed = int(rng.integers(0, 2**31))
    return TrialParams(
        reserves=reserves, kappa=kappa, solver_seed=solver_seed, voting_seed=voting_seed
    )


def build_scenario(config: ExperimentConfig) -> model.Scenario:
    src = config.scenario
    if src.kind == "file":
        return model.load_scenario(src.path)
    if src.kind == "table":
        return model.Scenario.from_table(np.asarray(src.costs, dtype=float))
    from . import ctop

    instance = ctop.generate_scenario(
        src.sectors, src.flights, src.options, src.grid, src.horizon, src.seed
    )
    return model.Scenario.from_instance(instance)


def run_trial(
    config: ExperimentConfig,
    trial_id: int,
    scenario: model.Scenario,
    shared_baselines: dict | None = None,
) -> TrialRecord:
    """One oversight run plus matched baselines under sampled parameters."""
    params = _sample(config, trial_id, scenario.n_agents)
    table = scenario.full_cost_table()
    b = np.array([1.0 / (params.kappa * r) for r in params.reserves])
    started = time.perf_counter()
    try:
        record = oversight.run_oversight(
            scenario,
            np.asarray(params.reserves),
            oversight.OversightParams(
                kappa=params.kappa, taco=config.taco, solver=config.solver
            ),
            seed=params.solver_seed,
        )
        report = analysis.verify_bounds(record, table, params.kappa)
        baseline_costs = dict(shared_baselines or {})
        if config.run_baselines:
            vote = baselines.voting(scenario, seed=params.voting_seed)
            baseline_costs["voting"] = vote.system_cost
        first, last = record.rounds[0], record.rounds[-1]
        _, opt_cost = analysis.system_optimum(table)
        return TrialRecord(
            trial=trial_id,
            kappa=params.kappa,
            reserves=params.reserves,
            b_mean=float(b.mean()),
            r_term=record.r_term,
            r_bound=report.round_bound,
            cost_first=first.system_cost,
            cost_final=last.system_cost,
            gini_first=first.gini,
            gini_final=last.gini,
            gap=report.observed_gap,
            gap_bound=report.gap_bound_at_term,
            agreed_choice=record.final_choice,
            bound_violations=report.violations,
            baseline_costs=baseline_costs,
            wall_time=time.perf_counter() - started,
        )
    except (oversight.OversightCapError, taco.TacoCapError) as exc:
        return TrialRecord(
            trial=trial_id,
            kappa=params.kappa,
            reserves=params.reserves,
            b_mean=float(b.mean()),
            r_term=0,
            r_bound=0,
            cost_first=float("nan"),
            cost_final=float("nan"),
            gini_first=float("nan"),
            gini_final=float("nan"),
            gap=float("nan"),
            gap_bound=float("nan"),
            agreed_choice=-1,
            bound_violations=(),
            baseline_costs={},
            wall_time=time.perf_counter() - started,
            error=f"{type(exc).__name__}: {exc}",
        )


def run_monte_carlo(config: ExperimentConfig) -> list[TrialRecord]:
    """All trials, sorted by trial id; identical output at any thread count."""
    scenario = build_scenario(config)
    scenario.full_cost_table()  # materialize once, shared read-only afterwards
    shared = {}
    if config.run_baselines:
        shared["c-ctop"] = baselines.centralized_ctop(scenario).system_cost
        if scenario.instance is not None:
            shared["f-ctop"] = baselines.fcfs_ctop(scenario).system_cost
    if config.threads == 1:
        records = [
            run_trial(config, t, scenario, shared) for t in range(config.trials)
        ]
    else:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            records = list(
                pool.map(
                    lambda t: run_trial(config, t, scenario, shared),
                    range(config.trials),
                )
            )
    return sorted(records, key=lambda r: r.trial)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def trial_rows(record: TrialRecord) -> list[dict]:
    """The oversight row plus one row per available baseline."""
    rows = [
        {
            "trial": record.trial,
            "kappa": record.kappa,
            "b_mean": record.b_mean,
            "r_term": record.r_term,
            "r_bound": record.r_bound,
            "cost_first": record.cost_first,
            "cost_final": record.cost_final,
            "cost_ratio": record.cost_ratio,
            "gini_first": record.gini_first,
            "gini_final": record.gini_final,
            "gini_ratio": record.gini_ratio,
            "gap": record.gap,
            "gap_bound": record.gap_bound,
            "mechanism": "oversight",
        }
    ]
    for mechanism in ("c-ctop", "f-ctop", "voting"):
        cost = record.baseline_costs.get(mechanism)
        if cost is None:
            continue
        rows.append(
            {
                "trial": record.trial,
                "kappa": record.kappa,
                "b_mean": record.b_mean,
                "r_term": None,
                "r_bound": None,
                "cost_first": cost,
                "cost_final": cost,
                "cost_ratio": 1.0,
                "gini_first": None,
                "gini_final": None,
                "gini_ratio": None,
                "gap": None,
                "gap_bound": None,
                "mechanism": mechanism,
            }
        )
    return rows


def export_results(records, fmt: str, path) -> None:
    """Write trial records as CSV rows or a lossless JSON document."""
    if fmt == "csv":
        try:
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
                writer.writeheader()
                for record in records:
                    for row in trial_rows(record):
                        writer.writerow({k: _fmt(v) for k, v in row.items()})
        except OSError as exc:
            raise OSError(f"cannot write CSV to {path}: {exc}") from exc
    elif fmt == "json":
        b_means = [r.b_mean for r in records if r.error is None]
        terciles = (
            list(np.quantile(b_means, [1 / 3, 2 / 3])) if len(b_means) >= 3 else None
        )
        payload = {
            "metadata": {
                "b_group_terciles": terciles,
                "note": "asset-value groups are terciles of per-trial mean valuations",
            },
            "trials": [asdict(r) for r in records],
        }
        try:
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, sort_keys=True, indent=1)
                fh.write("\n")
        except OSError as exc:
            raise OSError(f"cannot write JSON to {path}: {exc}") from exc
    else:
        raise ValueError(f"unknown export format {fmt!r}")


def records_from_json(path) -> list[TrialRecord]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    out = []
    for data in payload["trials"]:
        data = dict(data)
        data["reserves"] = tuple(data["reserves"])
        data["bound_violations"] = tuple(data["bound_violations"])
        out.append(TrialRecord(**data))
    return out


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build a config from parsed JSON, mirroring the dataclass fields."""
    kwargs = dict(data)
    if "scenario" in kwargs:
        kwargs["scenario"] = ScenarioSource(**kwargs["scenario"])
    if "solver" in kwargs:
        kwargs["solver"] = candidates.SolverConfig(**kwargs["solver"])
    if "taco" in kwargs:
        kwargs["taco"] = taco.TacoParams(**kwargs["taco"])
    if "reserve_range" in kwargs:
        kwargs["reserve_range"] = tuple(kwargs["reserve_range"])
    if "kappa_exponent_range" in kwargs:
        kwargs["kappa_exponent_range"] = tuple(kwargs["kappa_exponent_range"])
    return ExperimentConfig(**kwargs)
