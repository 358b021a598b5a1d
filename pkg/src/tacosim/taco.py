"""Trading auction for consensus.

Agents take round-robin turns selecting their profit-maximizing option and
paying for it in a common ledger of offer/payment units. Consensus is
reached either by unanimity (every agent's latest selection coincides) or
by indifference (inside a detected trading cycle, every agent's profit gap
over the cycled options falls below a tolerance).

A cycle candidate fires when an agent re-observes one of its own profit
vectors within the current trading-unit epoch. It is confirmed as a true
deadlock only if the public net-position state also matches the earlier
observation, i.e. the system as a whole has looped; only then is the
trading unit reduced. Premature reductions would geometrically exhaust the
remaining trading budget and can prevent termination.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CYCLE_MATCH_RTOL = 1e-12
# Bounded lookback for tolerance-based repeat matching. Bitwise repeats are
# caught by a dict in O(1); this scan only adds ulp-drift insurance for
# non-dyadic trading units, and a miss merely delays detection.
_SCAN_WINDOW = 16


class TacoCapError(RuntimeError):
    """Safety cap exceeded; carries the partial trace for diagnosis."""

    def __init__(self, message: str, partial: dict):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class TacoParams:
    """Trading-unit schedule and termination tolerances.

    epsilon=None scales the indifference tolerance to 1e-3 of the largest
    per-agent cost spread seen by this negotiation.
    """

    d0: float = 1.0
    gamma: float = 0.5
    epsilon: float | None = None
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.d0 <= 0:
            raise ValueError("d0 must be positive")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must be in (0, 1)")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True)
class Valuations:
    """Per-agent private value of one asset unit. Never broadcast."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("valuations must be a nonempty vector")
        if not np.all(arr > 0):
            raise ValueError("valuations must be strictly positive")
        object.__setattr__(self, "values", arr)


@dataclass
class TradingLedger:
    """Common offer/payment unit counts (agents x options) and current unit."""

    offers: np.ndarray
    payments: np.ndarray
    d: float

    @staticmethod
    def zeros(n_agents: int, n_options: int, d: float) -> "TradingLedger":
        return TradingLedger(
            offers=np.zeros((n_agents, n_options)),
            payments=np.zeros((n_agents, n_options)),
            d=d,
        )


@dataclass(frozen=True)
class Broadcast:
    """The only message agents emit: who selected what, at which unit."""

    step: int
    agent: int
    chosen: int
    unit: float


@dataclass(frozen=True)
class NegotiationOutcome:
    choice: int
    expenditures: np.ndarray
    unit_counts: np.ndarray
    payers: tuple[int, ...]
    beneficiaries: tuple[int, ...]
    steps: int
    terminated_by: str  # "unanimity" | "indifference"
    final_unit: float
    cycle_options: tuple[int, ...] | None
    max_conservation_error: float
    ledger: TradingLedger = field(repr=False)


def profit(b: float, offer: float, payment: float, cost: float) -> float:
    """Profit of one option: asset value of the net position minus cost."""
    return b * (offer - payment) - cost


def select_best(profits) -> int:
    """Argmax with deterministic lowest-index tie-breaking."""
    arr = np.asarray(profits, dtype=float)
    if arr.size == 0:
        raise ValueError("empty profit vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError("profit vector contains non-finite entries")
    return int(np.argmax(arr))


def apply_selection(ledger: TradingLedger, agent: int, chosen: int, n_agents: int) -> TradingLedger:
    """Common ledger update for one selection, in place.

    The selecting agent's payment units for the chosen option rise by n*d;
    every agent's offer units for it rise by d, so value-weighted net
    positions are conserved per option.
    """
    if not 0 <= chosen < ledger.offers.shape[1]:
        raise IndexError(f"chosen option {chosen} out of range")
    if n_agents != ledger.offers.shape[0]:
        raise ValueError("agent count does not match ledger shape")
    ledger.payments[agent, chosen] += n_agents * ledger.d
    ledger.offers[:, chosen] += ledger.d
    return ledger


def reduce_unit(d: float, gamma: float) -> float:
    """Refine the trading granularity after a confirmed cycle."""
    if d <= 0 or not 0 < gamma < 1:
        raise ValueError("require d > 0 and gamma in (0, 1)")
    return gamma * d


def expenditure(ledger: TradingLedger, agent: int, agreed: int) -> float:
    """Net asset units spent by `agent` on the agreed option (negative = received)."""
    if not 0 <= agreed < ledger.offers.shape[1]:
        raise IndexError(f"agreed option {agreed} out of range")
    return float(ledger.payments[agent, agreed] - ledger.offers[agent, agreed])


def _vectors_match(a, b) -> bool:
    """Componentwise equality within 1e-12 of the vectors' magnitude scale.

    Plain-Python arithmetic: the vectors are tiny and this sits on the
    negotiation hot path.
    """
    if len(a) != len(b):
        return False
    scale = 1.0
    for x in a:
        ax = abs(x)
        if ax > scale:
            scale = ax
    for y in b:
        ay = abs(y)
        if ay > scale:
            scale = ay
    tol = CYCLE_MATCH_RTOL * scale
    for x, y in zip(a, b):
        if abs(x - y) > tol:
            return False
    return True


def detect_cycle(history, agent: int, profits) -> bool:
    """Has `agent` already observed this profit vector in the current epoch?

    `history` holds one list of previously observed profit vectors per
    agent; callers clear it whenever the trading unit is reduced.
    """
    return any(_vectors_match(profits, seen) for seen in history[agent])


def run_taco(
    choices,
    cost,
    valuations,
    params: TacoParams | None = None,
    trace=None,
) -> NegotiationOutcome:
    """Negotiate one agreement over `choices`.

    cost is either a callable (agent, choice) -> float or an
    (agents x options) matrix aligned with `choices`. The returned choice
    is an element of `choices`; expenditures are read off the final ledger.
    Deterministic for fixed inputs. Raises TacoCapError if the safety cap
    is exceeded, which signals a parameterization bug.
    """
    params = params or TacoParams()
    b = valuations.values if isinstance(valuations, Valuations) else np.asarray(valuations, dtype=float)
    if b.ndim != 1 or not np.all(b > 0):
        raise ValueError("valuations must be a strictly positive vector")
    options = list(choices)
    if not options:
        raise ValueError("need at least one choice")
    n = b.size
    k = len(options)
    if callable(cost):
        costs = np.array([[float(cost(i, o)) for o in options] for i in range(n)])
    else:
        costs = np.asarray(cost, dtype=float)
        if costs.shape != (n, k):
            raise ValueError(f"cost matrix shape {costs.shape} != ({n}, {k})")
    if not np.all(np.isfinite(costs)):
        raise ValueError("costs must be finite")

    eps = params.epsilon
    if eps is None:
        spread = float(np.max(costs.max(axis=1) - costs.min(axis=1))) if k > 1 else 0.0
        eps = max(1e-3 * spread, 1e-12)

    # The turn loop runs in plain Python floats: the matrices are tiny, so
    # interpreter-level arithmetic beats numpy dispatch by a wide margin on
    # long negotiations. Updates mirror apply_selection exactly.
    offers = [[0.0] * k for _ in range(n)]
    payments = [[0.0] * k for _ in range(n)]
    net = [[0.0] * k for _ in range(n)]  # offers - payments
    cost_rows = [list(map(float, costs[i])) for i in range(n)]
    b_list = [float(x) for x in b]
    d = params.d0
    latest = [-1] * n
    # per agent: exact profit tuple -> list of observation step ids
    hist_exact: list[dict] = [dict() for _ in range(n)]
    # per agent: recent (profits, step) pairs for tolerance-based matching
    hist_recent: list[list] = [[] for _ in range(n)]
    snapshots: dict[int, tuple] = {}
    selections: list[tuple[int, int, int]] = []  # (step, agent, local option)
    steps = 0
    agent = 0
    max_cons_err = 0.0
    opt_range = range(k)

    def net_snapshot() -> tuple:
        return tuple(x for row in net for x in row)

    def gaps_below_eps(cycle_opts) -> bool:
        for i in range(n):
            p = [b_list[i] * net[i][j] - cost_rows[i][j] for j in cycle_opts]
            if max(p) - min(p) >= eps:
                return False
        return True

    def finish(local_choice: int, how: str, cycle_opts=None) -> NegotiationOutcome:
        ledger = TradingLedger(
            offers=np.asarray(offers, dtype=float),
            payments=np.asarray(payments, dtype=float),
            d=d,
        )
        exp = ledger.payments[:, local_choice] - ledger.offers[:, local_choice]
        units = np.round(np.maximum(exp, 0.0) / d).astype(int)
        payers = tuple(int(i) for i in range(n) if exp[i] > 0)
        beneficiaries = tuple(int(i) for i in range(n) if exp[i] < 0)
        return NegotiationOutcome(
            choice=options[local_choice],
            expenditures=exp,
            unit_counts=units,
            payers=payers,
            beneficiaries=beneficiaries,
            steps=steps,
            terminated_by=how,
            final_unit=d,
            cycle_options=(
                tuple(options[j] for j in cycle_opts) if cycle_opts is not None else None
            ),
            max_conservation_error=max_cons_err,
            ledger=ledger,
        )

    for _ in range(params.max_steps):
        bi = b_list[agent]
        row = net[agent]
        crow = cost_rows[agent]
        profits = tuple(bi * row[j] - crow[j] for j in opt_range)

        matched_step = None
        prior_steps = hist_exact[agent].get(profits)
        if prior_steps is None and hist_recent[agent]:
            for seen_key, _ in reversed(hist_recent[agent][-_SCAN_WINDOW:]):
                if _vectors_match(profits, seen_key):
                    prior_steps = hist_exact[agent].get(seen_key)
                    break
        if prior_steps:
            # candidate cycle: confirm that the whole system looped
            current = net_snapshot()
            for s0 in reversed(prior_steps):
                snap = snapshots[s0]
                if snap == current or _vectors_match(current, snap):
                    matched_step = s0
                    break

        if matched_step is not None:
            cycle_opts = sorted({c for (s, _, c) in selections if s >= matched_step})
            if gaps_below_eps(cycle_opts):
                return finish(cycle_opts[0], "indifference", cycle_opts)
            d = reduce_unit(d, params.gamma)
            hist_exact = [dict() for _ in range(n)]
            hist_recent = [[] for _ in range(n)]
            snapshots = {}
            agent = 0
            continue

        obs_step = steps + 1
        hist_exact[agent].setdefault(profits, []).append(obs_step)
        hist_recent[agent].append((profits, obs_step))
        snapshots[obs_step] = net_snapshot()

        # argmax with lowest-index ties, the select_best rule
        chosen = 0
        best = profits[0]
        for j in range(1, k):
            if profits[j] > best:
                chosen = j
                best = profits[j]
        steps += 1
        selections.append((steps, agent, chosen))
        payments[agent][chosen] += n * d
        net[agent][chosen] -= (n - 1) * d
        for i in range(n):
            offers[i][chosen] += d
            if i != agent:
                net[i][chosen] += d
        err = abs(sum(payments[i][chosen] - offers[i][chosen] for i in range(n)))
        if err > max_cons_err:
            max_cons_err = err
        if trace is not None:
            trace(Broadcast(step=steps, agent=agent, chosen=options[chosen], unit=d))
        latest[agent] = chosen
        if all(x == chosen for x in latest):
            return finish(chosen, "unanimity")
        agent = (agent + 1) % n

    raise TacoCapError(
        f"no consensus within {params.max_steps} turns",
        partial={
            "steps": steps,
            "d": d,
            "latest": list(latest),
            "selections_tail": selections[-50:],
        },
    )
