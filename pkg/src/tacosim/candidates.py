"""Candidate-choice generation.

Each agent proposes the choice minimizing its coordination-weighted
effective cost, either exactly (exhaustive scan, the oracle) or
heuristically (random-restart first-improvement local search over the
per-flight product space, standing in for an external evolutionary solver).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from . import model

if TYPE_CHECKING:  # pragma: no cover
    from .oversight import CoordinationState

EXHAUSTIVE_LIMIT = 10**6


@dataclass(frozen=True)
class SolverConfig:
    kind: str = "exhaustive"  # "exhaustive" | "local-search"
    restarts: int = 20
    moves: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("exhaustive", "local-search"):
            raise ValueError(f"unknown solver kind {self.kind!r}")
        if self.restarts < 1 or self.moves < 1:
            raise ValueError("restarts and moves must be >= 1")


def exhaustive_min(cost_fn: Callable[[int], float], m: int) -> tuple[int, float]:
    """Exact global minimizer over choices 0..m-1, ties to the lowest index."""
    if m > EXHAUSTIVE_LIMIT:
        raise ValueError(
            f"choice space of size {m} exceeds the exhaustive limit; use local-search"
        )
    best_idx = 0
    best_val = float(cost_fn(0))
    for idx in range(1, m):
        val = float(cost_fn(idx))
        if val < best_val:
            best_idx, best_val = idx, val
    return best_idx, best_val


def local_search_min(
    cost_fn: Callable[[int], float], radices, config: SolverConfig
) -> tuple[int, float]:
    """Random-restart first-improvement search over a product space.

    `radices` lists the option count of each coordinate; choice ids use the
    same mixed-radix encoding as bundles (coordinate 0 least significant).
    Each restart walks single-coordinate first-improvement moves to a local
    optimum, capped at `config.moves` accepted moves. The result can never
    beat the exhaustive minimum and matches it on separable objectives.
    """
    radices = list(radices)
    p = len(radices)
    weights = np.cumprod([1] + radices[:-1])  # digit -> choice id contribution
    rng = np.random.default_rng(config.seed)
    best: tuple[float, int] | None = None
    for _ in range(config.restarts):
        digits = [int(rng.integers(0, q)) for q in radices]
        idx = int(np.dot(digits, weights))
        val = float(cost_fn(idx))
        moves_left = config.moves
        improved = True
        while improved and moves_left > 0:
            improved = False
            for coord in range(p):
                for option in range(radices[coord]):
                    if option == digits[coord]:
                        continue
                    cand_idx = idx + (option - digits[coord]) * int(weights[coord])
                    cand_val = float(cost_fn(cand_idx))
                    if cand_val < val:
                        digits[coord] = option
                        idx, val = cand_idx, cand_val
                        moves_left -= 1
                        improved = True
                        break
                if improved:
                    break
        if best is None or (val, idx) < best:
            best = (val, idx)
    return best[1], best[0]


def _space_radices(scenario: model.Scenario) -> list[int]:
    if scenario.instance is not None:
        inst = scenario.instance
        return [inst.options_per_flight] * inst.n_flights
    return [scenario.n_choices]


def generate_candidate(
    agent: int,
    state: "CoordinationState",
    scenario: model.Scenario,
    config: SolverConfig | None = None,
) -> int:
    """The choice this agent proposes at the current coordination state.

    Exhaustive solving is exact; local search is deterministic for a fixed
    config seed, with every (agent, round) pair drawing an independent
    derived seed. Spaces too large to materialize are evaluated choice by
    choice, which is the regime local search exists for.
    """
    config = config or SolverConfig()
    if config.kind == "exhaustive":
        if scenario.n_choices > EXHAUSTIVE_LIMIT:
            raise ValueError(
                f"{scenario.n_choices} choices exceed the exhaustive limit; use local-search"
            )
        eff = state.effective_costs(agent, scenario.full_cost_table())
        return int(np.argmin(eff))
    derived = np.random.SeedSequence([config.seed, agent, state.round]).generate_state(1)[0]
    per_agent = SolverConfig(
        kind=config.kind, restarts=config.restarts, moves=config.moves, seed=int(derived)
    )
    if scenario.n_choices <= EXHAUSTIVE_LIMIT:
        eff = state.effective_costs(agent, scenario.full_cost_table())

        def cost_fn(c):
            return eff[c]

    else:
        w = state.w
        alpha = state.alpha

        def cost_fn(c):
            row = np.array(
                [model.individual_cost(scenario, i, c) for i in range(scenario.n_agents)]
            )
            return (float(w @ row) + float(row[agent])) / alpha

    idx, _ = local_search_min(cost_fn, _space_radices(scenario), per_agent)
    return idx
