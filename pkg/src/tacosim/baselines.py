"""Comparison mechanisms: centralized optimization, sequential
first-come-first-served assignment, and one-shot plurality voting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import analysis, candidates, ctop, model, oversight


@dataclass(frozen=True)
class BaselineResult:
    mechanism: str
    choice: int
    system_cost: float
    agent_costs: tuple[float, ...]
    gini: float


def _result(mechanism: str, scenario: model.Scenario, choice: int) -> BaselineResult:
    costs = scenario.full_cost_table()[choice]
    return BaselineResult(
        mechanism=mechanism,
        choice=int(choice),
        system_cost=float(costs.sum()),
        agent_costs=tuple(float(c) for c in costs),
        gini=analysis.gini(costs),
    )


def centralized_ctop(
    scenario: model.Scenario, solver: candidates.SolverConfig | None = None
) -> BaselineResult:
    """Minimize the total cost with full information.

    The exhaustive solver reproduces the brute-force system optimum exactly;
    local search gives the heuristic stand-in for large spaces.
    """
    solver = solver or candidates.SolverConfig()
    table = scenario.full_cost_table()
    totals = table.sum(axis=1)
    if solver.kind == "exhaustive":
        choice, _ = analysis.system_optimum(table)
    else:
        radices = (
            [scenario.instance.options_per_flight] * scenario.instance.n_flights
            if scenario.instance is not None
            else [scenario.n_choices]
        )
        choice, _ = candidates.local_search_min(lambda c: totals[c], radices, solver)
    return _result("c-ctop", scenario, choice)


def _congestion_cost(instance, sector, bundle, include):
    return ctop.eigen_complexity(ctop.occupancy(instance, sector, bundle, include=include))


def fcfs_ctop(scenario: model.Scenario, sector_cost=_congestion_cost) -> BaselineResult:
    """Assign flights in departure order, each to the option with the lowest
    marginal total cost given the flights fixed so far; later flights are
    not anticipated.

    sector_cost(instance, sector, bundle, include) evaluates one sector over
    a subset of flights; tests inject additive objectives through it.
    """
    if scenario.instance is None:
        raise ValueError("first-come-first-served needs per-flight structure")
    inst = scenario.instance
    order = sorted(range(inst.n_flights), key=lambda f: (inst.flights[f].departure, f))
    assigned: dict[int, int] = {}
    bundle = [0] * inst.n_flights
    for f in order:
        best_opt, best_cost = 0, None
        include = list(assigned) + [f]
        for opt in range(inst.options_per_flight):
            bundle[f] = opt
            cost = sum(
                sector_cost(inst, s, bundle, include) for s in range(inst.n_agents)
            )
            if best_cost is None or cost < best_cost:
                best_opt, best_cost = opt, cost
        bundle[f] = best_opt
        assigned[f] = best_opt
    choice = ctop.encode_bundle(bundle, inst.options_per_flight)
    return _result("f-ctop", scenario, choice)


def voting(scenario: model.Scenario, seed: int = 0) -> BaselineResult:
    """One-shot vote over candidates generated without coordination.

    Each agent votes for the pool option minimizing its own cost; plurality
    wins with ties resolved uniformly at random under the given seed.
    """
    state = oversight.CoordinationState.initial(scenario.n_agents)
    table = scenario.full_cost_table()
    cand = [
        candidates.generate_candidate(i, state, scenario) for i in range(scenario.n_agents)
    ]
    pool = sorted(set(cand))
    votes = np.zeros(len(pool), dtype=int)
    for i in range(scenario.n_agents):
        own = table[pool, i]
        votes[int(np.argmin(own))] += 1
    top = int(votes.max())
    tied = [j for j, v in enumerate(votes) if v == top]
    rng = np.random.default_rng(seed)
    winner = pool[tied[int(rng.integers(0, len(tied)))]]
    return _result("voting", scenario, winner)
