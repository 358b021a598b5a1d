"""Outer negotiation-and-oversight loop.

Per round: every agent proposes a candidate minimizing its effective cost,
the pooled candidates go through a trading auction under taxation-scaled
asset valuations, shortfalls against reserves are evaluated, and the
coordination factor is raised for agents that overspent. The loop ends when
no agent exceeds its reserve.

The auction inside a round negotiates over the agents' *effective* costs at
the current coordination state: the same objective candidates were
generated from, and the quantity whose flattening shrinks transfers across
rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import analysis, candidates, model, taco


class OversightCapError(RuntimeError):
    """Outer-loop safety cap exceeded; carries the partial run record."""

    def __init__(self, message: str, record: "RunRecord"):
        super().__init__(message)
        self.record = record


@dataclass(frozen=True)
class CoordinationState:
    """Coordination factor w and round index r. alpha is always ||w||_1 + 1."""

    w: np.ndarray
    round: int = 1

    def __post_init__(self):
        arr = np.asarray(self.w, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("w must be a nonempty vector")
        if np.any(arr < 0):
            raise ValueError("w must be nonnegative")
        object.__setattr__(self, "w", arr)
        if self.round < 1:
            raise ValueError("round index starts at 1")

    @staticmethod
    def initial(n_agents: int) -> "CoordinationState":
        return CoordinationState(w=np.zeros(n_agents), round=1)

    @property
    def alpha(self) -> float:
        return float(np.sum(self.w)) + 1.0

    @property
    def w_bar(self) -> np.ndarray:
        return self.w / self.alpha

    def effective_costs(self, agent: int, cost_table: np.ndarray) -> np.ndarray:
        """Normalized effective cost of every choice for one agent."""
        return (cost_table @ self.w + cost_table[:, agent]) / self.alpha


def shared_score(w, choice_costs) -> float:
    """Coordination-weighted score of one choice: w . J(o)."""
    w = np.asarray(w, dtype=float)
    costs = np.asarray(choice_costs, dtype=float)
    if w.shape != costs.shape:
        raise ValueError(f"dimension mismatch: {w.shape} vs {costs.shape}")
    return float(w @ costs)


def effective_cost(state: CoordinationState, agent: int, choice_costs) -> float:
    """Shared score under normalized weights plus the agent's own cost over alpha."""
    costs = np.asarray(choice_costs, dtype=float)
    return shared_score(state.w_bar, costs) + float(costs[agent]) / state.alpha


def asset_valuation(kappa: float, reserve: float) -> float:
    """Constant-product asset value: one unit is worth 1/(kappa * reserve)."""
    if kappa <= 0 or reserve <= 0:
        raise ValueError("kappa and reserve must be positive")
    return 1.0 / (kappa * reserve)


def shortfall(spent: float, reserve: float) -> float:
    """Normalized excess of expenditure over reserve; zero when within it."""
    if reserve <= 0:
        raise ValueError("reserve must be positive")
    return max(0.0, spent - reserve) / reserve


def update_coordination(state: CoordinationState, shortfalls) -> CoordinationState:
    """Add normalized shortfalls to w. Total shortfall must be positive."""
    s = np.asarray(shortfalls, dtype=float)
    total = float(np.sum(s))
    if total <= 0:
        raise ValueError("update_coordination requires a positive total shortfall")
    return CoordinationState(w=state.w + s / total, round=state.round + 1)


@dataclass(frozen=True)
class OversightParams:
    kappa: float
    taco: taco.TacoParams = field(default_factory=taco.TacoParams)
    solver: candidates.SolverConfig = field(default_factory=candidates.SolverConfig)
    max_rounds: int | None = None  # None -> max(ceil(kappa * B_max) + 2, 10)

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")


@dataclass(frozen=True)
class RoundEntry:
    round: int
    alpha: float
    w: np.ndarray
    candidates: tuple[int, ...]
    pool: tuple[int, ...]
    outcome: taco.NegotiationOutcome
    shortfalls: np.ndarray
    normalized_shortfalls: np.ndarray | None  # None on the terminal round
    system_cost: float
    gini: float

    @property
    def total_shortfall(self) -> float:
        return float(np.sum(self.shortfalls))


@dataclass(frozen=True)
class RunRecord:
    rounds: tuple[RoundEntry, ...]
    kappa: float
    reserves: np.ndarray
    b_max: float
    epsilon: float

    @property
    def r_term(self) -> int:
        return len(self.rounds)

    @property
    def final_choice(self) -> int:
        return self.rounds[-1].outcome.choice

    @property
    def valuations(self) -> np.ndarray:
        return 1.0 / (self.kappa * self.reserves)


def record_to_dict(record: RunRecord, cost_table=None) -> dict:
    """JSON-ready view of a run. Embeds the cost table when given so the
    record can be bound-checked without the originating scenario."""
    data = {
        "kappa": record.kappa,
        "reserves": record.reserves.tolist(),
        "b_max": record.b_max,
        "epsilon": record.epsilon,
        "r_term": record.r_term,
        "final_choice": record.final_choice,
        "rounds": [
            {
                "round": e.round,
                "alpha": e.alpha,
                "w": e.w.tolist(),
                "candidates": list(e.candidates),
                "pool": list(e.pool),
                "shortfalls": e.shortfalls.tolist(),
                "normalized_shortfalls": (
                    None
                    if e.normalized_shortfalls is None
                    else e.normalized_shortfalls.tolist()
                ),
                "system_cost": e.system_cost,
                "gini": e.gini,
                "outcome": {
                    "choice": e.outcome.choice,
                    "expenditures": e.outcome.expenditures.tolist(),
                    "unit_counts": e.outcome.unit_counts.tolist(),
                    "payers": list(e.outcome.payers),
                    "beneficiaries": list(e.outcome.beneficiaries),
                    "steps": e.outcome.steps,
                    "terminated_by": e.outcome.terminated_by,
                    "final_unit": e.outcome.final_unit,
                    "cycle_options": (
                        None
                        if e.outcome.cycle_options is None
                        else list(e.outcome.cycle_options)
                    ),
                    "max_conservation_error": e.outcome.max_conservation_error,
                },
            }
            for e in record.rounds
        ],
    }
    if cost_table is not None:
        data["cost_table"] = np.asarray(cost_table, dtype=float).tolist()
    return data


def record_from_dict(data: dict) -> tuple[RunRecord, np.ndarray | None]:
    """Inverse of record_to_dict (ledgers are not round-tripped)."""
    entries = []
    for e in data["rounds"]:
        o = e["outcome"]
        outcome = taco.NegotiationOutcome(
            choice=int(o["choice"]),
            expenditures=np.asarray(o["expenditures"], dtype=float),
            unit_counts=np.asarray(o["unit_counts"], dtype=int),
            payers=tuple(o["payers"]),
            beneficiaries=tuple(o["beneficiaries"]),
            steps=int(o["steps"]),
            terminated_by=o["terminated_by"],
            final_unit=float(o["final_unit"]),
            cycle_options=(
                None if o["cycle_options"] is None else tuple(o["cycle_options"])
            ),
            max_conservation_error=float(o["max_conservation_error"]),
            ledger=None,
        )
        entries.append(
            RoundEntry(
                round=int(e["round"]),
                alpha=float(e["alpha"]),
                w=np.asarray(e["w"], dtype=float),
                candidates=tuple(e["candidates"]),
                pool=tuple(e["pool"]),
                outcome=outcome,
                shortfalls=np.asarray(e["shortfalls"], dtype=float),
                normalized_shortfalls=(
                    None
                    if e["normalized_shortfalls"] is None
                    else np.asarray(e["normalized_shortfalls"], dtype=float)
                ),
                system_cost=float(e["system_cost"]),
                gini=float(e["gini"]),
            )
        )
    record = RunRecord(
        rounds=tuple(entries),
        kappa=float(data["kappa"]),
        reserves=np.asarray(data["reserves"], dtype=float),
        b_max=float(data["b_max"]),
        epsilon=float(data["epsilon"]),
    )
    table = data.get("cost_table")
    return record, None if table is None else np.asarray(table, dtype=float)


def record_csv_rows(record: RunRecord, run_id: str) -> list[dict]:
    """One flat row per round for CSV export."""
    rb = analysis.round_bound(record.kappa, record.b_max) if record.b_max > 0 else 1
    return [
        {
            "run_id": run_id,
            "round": e.round,
            "kappa": record.kappa,
            "alpha": e.alpha,
            "total_shortfall": e.total_shortfall,
            "system_cost": e.system_cost,
            "gini": e.gini,
            "agreed_choice": e.outcome.choice,
            "r_bound": rb,
        }
        for e in record.rounds
    ]


def run_oversight(
    scenario: model.Scenario,
    reserves,
    params: OversightParams,
    seed: int = 0,
    trace=None,
) -> RunRecord:
    """Run candidate generation, negotiation, and shortfall rounds to termination.

    Reproducible for a fixed seed (only local-search candidate generation
    consumes randomness). Raises OversightCapError with the partial record
    if the safety cap is hit, which the round bound says cannot happen for
    caps above ceil(kappa * B_max).
    """
    res = reserves.values if isinstance(reserves, model.Reserves) else np.asarray(reserves, dtype=float)
    if res.shape != (scenario.n_agents,):
        raise ValueError("reserves must have one entry per agent")
    if not np.all(res > 0):
        raise ValueError("reserves must be strictly positive")

    table = scenario.full_cost_table()
    b_max, _ = analysis.b_max(table)
    b = np.array([asset_valuation(params.kappa, r) for r in res])
    taco_params = params.taco
    if taco_params.epsilon is None:
        taco_params = taco.TacoParams(
            d0=taco_params.d0,
            gamma=taco_params.gamma,
            epsilon=max(1e-3 * b_max, 1e-12),
            max_steps=taco_params.max_steps,
        )
    cap = params.max_rounds
    if cap is None:
        cap = max(math.ceil(params.kappa * b_max) + 2, 10)

    solver = candidates.SolverConfig(
        kind=params.solver.kind,
        restarts=params.solver.restarts,
        moves=params.solver.moves,
        seed=seed if params.solver.kind == "local-search" else params.solver.seed,
    )

    state = CoordinationState.initial(scenario.n_agents)
    entries: list[RoundEntry] = []
    while True:
        cand = tuple(
            candidates.generate_candidate(i, state, scenario, solver)
            for i in range(scenario.n_agents)
        )
        pool = tuple(sorted(set(cand)))
        eff = np.array([state.effective_costs(i, table)[list(pool)] for i in range(scenario.n_agents)])
        outcome = taco.run_taco(pool, eff, b, taco_params, trace=trace)
        spent = outcome.expenditures
        s = np.array([shortfall(float(spent[i]), float(res[i])) for i in range(scenario.n_agents)])
        total = float(np.sum(s))
        agreed_costs = table[outcome.choice]
        entry = RoundEntry(
            round=state.round,
            alpha=state.alpha,
            w=state.w.copy(),
            candidates=cand,
            pool=pool,
            outcome=outcome,
            shortfalls=s,
            normalized_shortfalls=None if total == 0 else s / total,
            system_cost=float(np.sum(agreed_costs)),
            gini=analysis.gini(agreed_costs),
        )
        entries.append(entry)
        if total == 0:
            return RunRecord(
                rounds=tuple(entries),
                kappa=params.kappa,
                reserves=res.copy(),
                b_max=b_max,
                epsilon=taco_params.epsilon,
            )
        if state.round >= cap:
            raise OversightCapError(
                f"no reserve-feasible agreement within {cap} rounds",
                RunRecord(
                    rounds=tuple(entries),
                    kappa=params.kappa,
                    reserves=res.copy(),
                    b_max=b_max,
                    epsilon=taco_params.epsilon,
                ),
            )
        state = update_coordination(state, s)
