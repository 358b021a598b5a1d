"""Core domain types: choice sets, cost tables, reserves, and scenarios.

A scenario is the cost oracle everything else runs against: either an
explicit (choices x agents) table or a trajectory-coordination instance
whose costs are computed on demand and cached.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import ctop

ChoiceId = int


@dataclass(frozen=True)
class CostTable:
    """Dense per-agent costs, rows = choices (m), columns = agents (n)."""

    costs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.costs, dtype=float)
        if arr.ndim != 2:
            raise ValueError("cost table must be 2-dimensional")
        object.__setattr__(self, "costs", arr)

    @property
    def n_choices(self) -> int:
        return self.costs.shape[0]

    @property
    def n_agents(self) -> int:
        return self.costs.shape[1]


@dataclass(frozen=True)
class Reserves:
    """Per-agent asset reserves, strictly positive."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("reserves must be a nonempty vector")
        if not np.all(arr > 0):
            raise ValueError("reserves must be strictly positive")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class Scenario:
    """Cost source plus choice-space/agent bookkeeping.

    Exactly one of `table` and `instance` is set. Costs of trajectory
    instances are expensive, so the full table is materialized lazily and
    cached; the scenario is otherwise immutable and safe to share between
    concurrent runs.
    """

    n_agents: int
    n_choices: int
    table: CostTable | None = None
    instance: ctop.CtopInstance | None = None
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @staticmethod
    def from_table(costs, label: str = "") -> "Scenario":
        table = costs if isinstance(costs, CostTable) else CostTable(np.asarray(costs, dtype=float))
        return Scenario(
            n_agents=table.n_agents, n_choices=table.n_choices, table=table, label=label
        )

    @staticmethod
    def from_instance(instance: ctop.CtopInstance, label: str = "") -> "Scenario":
        return Scenario(
            n_agents=instance.n_agents,
            n_choices=instance.n_choices,
            instance=instance,
            label=label,
        )

    def full_cost_table(self) -> np.ndarray:
        """The complete (choices x agents) cost matrix."""
        if self.table is not None:
            return self.table.costs
        cached = self._cache.get("table")
        if cached is None:
            inst = self.instance
            q, p = inst.options_per_flight, inst.n_flights
            cached = np.empty((self.n_choices, self.n_agents))
            for idx in range(self.n_choices):
                bundle = ctop.decode_bundle(idx, q, p)
                for agent in range(self.n_agents):
                    cached[idx, agent] = ctop.bundle_cost(inst, agent, bundle)
            self._cache["table"] = cached
        return cached


def individual_cost(scenario: Scenario, agent: int, choice: ChoiceId) -> float:
    """Intrinsic cost of `choice` for `agent`. Pure for a fixed scenario."""
    if not 0 <= agent < scenario.n_agents:
        raise IndexError(f"agent {agent} out of range [0, {scenario.n_agents})")
    if not 0 <= choice < scenario.n_choices:
        raise IndexError(f"choice {choice} out of range [0, {scenario.n_choices})")
    if scenario.table is not None:
        return float(scenario.table.costs[choice, agent])
    inst = scenario.instance
    bundle = ctop.decode_bundle(choice, inst.options_per_flight, inst.n_flights)
    return ctop.bundle_cost(inst, agent, bundle)


def validate_scenario(scenario: Scenario) -> list[str]:
    """All violations as human-readable strings; empty list iff valid."""
    problems = []
    if scenario.n_agents < 1:
        problems.append("empty agent set")
    if scenario.n_choices < 1:
        problems.append("empty choice set")
    if (scenario.table is None) == (scenario.instance is None):
        problems.append("scenario must have exactly one cost source")
        return problems
    if scenario.table is not None:
        costs = scenario.table.costs
        if costs.shape != (scenario.n_choices, scenario.n_agents):
            problems.append(
                f"cost table shape {costs.shape} does not match "
                f"(choices={scenario.n_choices}, agents={scenario.n_agents})"
            )
        bad = np.argwhere(~np.isfinite(costs))
        for row, col in bad:
            problems.append(f"non-finite cost at (choice {row}, agent {col})")
    else:
        inst = scenario.instance
        if inst.n_agents != scenario.n_agents:
            problems.append("agent count does not match instance sector count")
        if inst.n_choices != scenario.n_choices:
            problems.append("choice count does not match instance bundle count")
        problems.extend(inst.validate())
    return problems


def load_scenario(path) -> Scenario:
    """Load either an explicit-table file or a trajectory instance file."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if "costs" in data:
        costs = np.asarray(data["costs"], dtype=float)
        if costs.ndim != 2:
            raise ctop.SchemaError("'costs' must be a matrix")
        if "agents" in data and costs.shape[1] != int(data["agents"]):
            raise ctop.SchemaError(
                f"'agents' is {data['agents']} but costs has {costs.shape[1]} columns"
            )
        if "choices" in data and costs.shape[0] != int(data["choices"]):
            raise ctop.SchemaError(
                f"'choices' is {data['choices']} but costs has {costs.shape[0]} rows"
            )
        return Scenario.from_table(costs, label=str(path))
    if "flights" in data:
        return Scenario.from_instance(ctop.instance_from_dict(data), label=str(path))
    raise ctop.SchemaError("file is neither an explicit table nor a trajectory instance")


def save_scenario(scenario: Scenario, path) -> None:
    if scenario.table is not None:
        payload = {
            "agents": scenario.n_agents,
            "choices": scenario.n_choices,
            "costs": scenario.table.costs.tolist(),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
    else:
        ctop.save_instance(scenario.instance, path)
