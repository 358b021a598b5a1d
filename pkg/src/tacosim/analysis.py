"""Analytical bounds, system-level metrics, and bound verification.

Everything here is pure arithmetic over cost tables and run records: the
maximum cost spread that scales every bound, round/termination bounds in
terms of the taxation parameter, selection-error and optimality-gap bounds,
fairness metrics, and the report that checks a finished run against all of
them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .oversight import RunRecord

# tolerance for float-noise in otherwise-exact bound comparisons
_FLOAT_GUARD = 1e-9


def b_max(cost_table) -> tuple[float, np.ndarray]:
    """Maximum spread of intrinsic costs: per-agent spreads and their max.

    Computed over the full choice space, matching the quantifier every
    bound uses.
    """
    table = np.asarray(cost_table, dtype=float)
    if table.ndim != 2 or table.size == 0:
        raise ValueError("cost table must be a nonempty matrix")
    spreads = table.max(axis=0) - table.min(axis=0)
    return float(spreads.max()), spreads


def round_bound(kappa: float, bmax: float) -> int:
    """Hard upper bound on the termination round: ceil(kappa * B_max), at least 1."""
    if kappa <= 0 or bmax < 0:
        raise ValueError("require kappa > 0 and B_max >= 0")
    return max(1, math.ceil(kappa * bmax))


def kappa_for_rounds(r_des: int, bmax: float) -> float:
    """Largest kappa that guarantees termination within r_des rounds.

    Infinite when B_max is 0 (any kappa terminates immediately). The result
    is nudged down by ulps if float rounding would otherwise push
    ceil(kappa * B_max) past r_des.
    """
    if r_des < 1:
        raise ValueError("r_des must be >= 1")
    if bmax < 0:
        raise ValueError("B_max must be nonnegative")
    if bmax == 0:
        return math.inf
    kappa = r_des / bmax
    while math.ceil(kappa * bmax) > r_des:
        kappa = math.nextafter(kappa, 0.0)
    return kappa


def gap_bound(n: int, bmax: float, delta_r: float, alpha_r: float) -> float:
    """System-optimality gap bound: n * (B_max * delta_r + B_max / alpha_r)."""
    if alpha_r < 1 or delta_r < 0:
        raise ValueError("require alpha_r >= 1 and delta_r >= 0")
    return n * (bmax * delta_r + bmax / alpha_r)


def kappa_for_gap(n: int, bmax: float, tau: float) -> float:
    """Necessary kappa to make a target gap tau reachable, using the
    worst-case weight misalignment 2(1 - 1/n).

    Raises for infeasible targets (tau at or below 2(n-1) * B_max). A zero
    cost spread makes every target trivially reachable, signalled by 0.
    """
    if n < 1 or bmax < 0:
        raise ValueError("require n >= 1 and B_max >= 0")
    if bmax == 0:
        return 0.0
    sigma_term = 2 * (n - 1) * bmax
    if tau <= sigma_term:
        raise ValueError(
            f"target gap {tau} is infeasible: must exceed 2(n-1)*B_max = {sigma_term}"
        )
    return math.floor(n * bmax / (tau - sigma_term)) / bmax


def delta_misalignment(w) -> float:
    """L1 distance of the normalized coordination weights from uniform."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("w must be a nonempty vector")
    alpha = float(np.sum(w)) + 1.0
    return float(np.abs(w / alpha - 1.0 / w.size).sum())


def sigma_max(n: int) -> float:
    """Worst-case misalignment over the weight simplex: 2(1 - 1/n)."""
    return 2.0 * (1.0 - 1.0 / n)


def system_cost(cost_table, choice: int) -> float:
    """Total cost of one choice across agents."""
    table = np.asarray(cost_table, dtype=float)
    if not 0 <= choice < table.shape[0]:
        raise IndexError(f"choice {choice} out of range")
    return float(table[choice].sum())


def system_optimum(cost_table) -> tuple[int, float]:
    """Brute-force minimizer of the system cost, ties to the lowest index.

    This is the reference oracle for every gap measurement.
    """
    table = np.asarray(cost_table, dtype=float)
    totals = table.sum(axis=1)
    idx = int(np.argmin(totals))
    return idx, float(totals[idx])


def selection_error(w, cost_table, chosen: int) -> tuple[float, int]:
    """Gap of the chosen option's normalized shared score to the best one.

    Returns (eta, best) where best is the full-space minimizer of the
    shared score under w/alpha.
    """
    w = np.asarray(w, dtype=float)
    table = np.asarray(cost_table, dtype=float)
    alpha = float(np.sum(w)) + 1.0
    scores = table @ (w / alpha)
    best = int(np.argmin(scores))
    return float(scores[chosen] - scores[best]), best


def gini(values) -> float:
    """Gini index of a cost vector; 0 is perfectly equitable.

    Negative vectors are shifted so their minimum is zero before applying
    the standard mean-absolute-difference formula.
    """
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("need a nonempty vector")
    if x.min() < 0:
        x = x - x.min()
    mean = float(x.mean())
    if mean == 0.0:
        return 0.0
    n = x.size
    diff_sum = float(np.abs(x[:, None] - x[None, :]).sum())
    return diff_sum / (2 * n * n * mean)


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=float)
    ranks[order] = np.arange(1, x.size + 1)
    # average ranks over ties
    for value in np.unique(x):
        mask = x == value
        if mask.sum() > 1:
            ranks[mask] = ranks[mask].mean()
    return ranks


def spearman(x, y) -> float:
    """Spearman rank correlation with average ranks for ties."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need two equal-length vectors with at least 2 entries")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    denom = float(np.sqrt((rx**2).sum() * (ry**2).sum()))
    if denom == 0.0:
        return 0.0
    return float((rx * ry).sum() / denom)


@dataclass(frozen=True)
class RoundBounds:
    round: int
    alpha: float
    alpha_ok: bool
    delta: float
    delta_ok: bool
    eta: float
    eta_bound: float
    eta_ok: bool
    shared_score_best: int
    flatten_spread: float
    flatten_bound: float
    flatten_ok: bool
    max_payer_value: float
    payer_bound: float
    payer_ok: bool
    gap_bound: float


@dataclass(frozen=True)
class BoundReport:
    b_max: float
    per_agent_spread: tuple[float, ...]
    sigma_max: float
    round_bound: int
    r_term: int
    round_bound_ok: bool
    observed_gap: float
    gap_bound_at_term: float
    gap_ok: bool
    max_conservation_error: float
    conservation_ok: bool
    rounds: tuple[RoundBounds, ...]
    kappa_max_for_observed_rounds: float
    kappa_min_for_tau: float | None
    violations: tuple[str, ...] = field(default=())

    @property
    def all_ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "b_max": self.b_max,
            "per_agent_spread": list(self.per_agent_spread),
            "sigma_max": self.sigma_max,
            "round_bound": self.round_bound,
            "r_term": self.r_term,
            "round_bound_ok": self.round_bound_ok,
            "observed_gap": self.observed_gap,
            "gap_bound_at_term": self.gap_bound_at_term,
            "gap_ok": self.gap_ok,
            "max_conservation_error": self.max_conservation_error,
            "conservation_ok": self.conservation_ok,
            "kappa_max_for_observed_rounds": self.kappa_max_for_observed_rounds,
            "kappa_min_for_tau": self.kappa_min_for_tau,
            "violations": list(self.violations),
            "rounds": [
                {
                    "round": r.round,
                    "alpha": r.alpha,
                    "alpha_ok": r.alpha_ok,
                    "delta": r.delta,
                    "delta_ok": r.delta_ok,
                    "eta": r.eta,
                    "eta_bound": r.eta_bound,
                    "eta_ok": r.eta_ok,
                    "shared_score_best": r.shared_score_best,
                    "flatten_spread": r.flatten_spread,
                    "flatten_bound": r.flatten_bound,
                    "flatten_ok": r.flatten_ok,
                    "max_payer_value": r.max_payer_value,
                    "payer_bound": r.payer_bound,
                    "payer_ok": r.payer_ok,
                    "gap_bound": r.gap_bound,
                }
                for r in self.rounds
            ],
        }


def verify_bounds(
    record: "RunRecord", cost_table, kappa: float, tau: float | None = None
) -> BoundReport:
    """Check one finished run against every analytical bound.

    All comparisons allow only float-noise slack; the payer transfer check
    additionally allows one trading quantum (final unit times the payer's
    valuation) because trading is discrete while the bound is continuous.
    """
    table = np.asarray(cost_table, dtype=float)
    n = table.shape[1]
    bmax, spreads = b_max(table)
    smax = sigma_max(n)
    b = 1.0 / (kappa * np.asarray(record.reserves, dtype=float))

    violations: list[str] = []
    per_round: list[RoundBounds] = []
    max_cons = 0.0
    for entry in record.rounds:
        r = entry.round
        guard = _FLOAT_GUARD * max(1.0, bmax)
        alpha_ok = abs(entry.alpha - r) <= _FLOAT_GUARD * max(1.0, r)
        delta = delta_misalignment(entry.w)
        delta_ok = delta <= smax + _FLOAT_GUARD
        eta, best = selection_error(entry.w, table, entry.outcome.choice)
        eta_bound = bmax / entry.alpha
        eta_ok = eta <= eta_bound + guard
        pool = list(entry.pool)
        eff = np.array(
            [(table @ entry.w + table[:, i])[pool] / entry.alpha for i in range(n)]
        )
        flatten = float((eff.max(axis=1) - eff.min(axis=1)).max()) if len(pool) > 1 else 0.0
        flatten_bound = bmax / entry.alpha
        flatten_ok = flatten <= flatten_bound + guard
        spent = entry.outcome.expenditures
        payer_values = [
            (float(b[i] * spent[i]), float(b[i])) for i in range(n) if spent[i] > 0
        ]
        quantum = entry.outcome.final_unit
        payer_bound = bmax / entry.alpha
        payer_ok = all(
            v <= payer_bound + bi * quantum + guard for v, bi in payer_values
        )
        max_payer = max((v for v, _ in payer_values), default=0.0)
        max_cons = max(max_cons, entry.outcome.max_conservation_error)
        per_round.append(
            RoundBounds(
                round=r,
                alpha=entry.alpha,
                alpha_ok=alpha_ok,
                delta=delta,
                delta_ok=delta_ok,
                eta=eta,
                eta_bound=eta_bound,
                eta_ok=eta_ok,
                shared_score_best=best,
                flatten_spread=flatten,
                flatten_bound=flatten_bound,
                flatten_ok=flatten_ok,
                max_payer_value=max_payer,
                payer_bound=payer_bound,
                payer_ok=payer_ok,
                gap_bound=gap_bound(n, bmax, delta, entry.alpha),
            )
        )
        for name, ok in (
            ("alpha", alpha_ok),
            ("delta", delta_ok),
            ("selection-error", eta_ok),
            ("flattening", flatten_ok),
            ("payer-transfer", payer_ok),
        ):
            if not ok:
                violations.append(f"round {r}: {name}")

    rb = round_bound(kappa, bmax)
    round_ok = record.r_term <= rb
    if not round_ok:
        violations.append(f"round bound: r_term {record.r_term} > {rb}")
    _, opt_cost = system_optimum(table)
    observed_gap = record.rounds[-1].system_cost - opt_cost
    term = record.rounds[-1]
    gap_b = gap_bound(n, bmax, delta_misalignment(term.w), term.alpha)
    gap_ok = observed_gap <= gap_b + _FLOAT_GUARD * max(1.0, bmax)
    if not gap_ok:
        violations.append(f"optimality gap: {observed_gap} > {gap_b}")
    cons_ok = max_cons <= 1e-9
    if not cons_ok:
        violations.append(f"ledger conservation: {max_cons} > 1e-9")

    kappa_min = None
    if tau is not None:
        try:
            kappa_min = kappa_for_gap(n, bmax, tau)
        except ValueError:
            kappa_min = None

    return BoundReport(
        b_max=bmax,
        per_agent_spread=tuple(float(s) for s in spreads),
        sigma_max=smax,
        round_bound=rb,
        r_term=record.r_term,
        round_bound_ok=round_ok,
        observed_gap=observed_gap,
        gap_bound_at_term=gap_b,
        gap_ok=gap_ok,
        max_conservation_error=max_cons,
        conservation_ok=cons_ok,
        rounds=tuple(per_round),
        kappa_max_for_observed_rounds=kappa_for_rounds(record.r_term, bmax)
        if bmax > 0
        else math.inf,
        kappa_min_for_tau=kappa_min,
        violations=tuple(violations),
    )
