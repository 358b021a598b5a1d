"""Synthetic decentralized trajectory-coordination scenarios.

Sector managers are the agents; each evaluates a bundle (one trajectory
option per flight) by the congestion it induces in its own sector. The
congestion score is the dominant eigenvalue of the time-sampled covariance
of grid-cell occupancy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class SchemaError(ValueError):
    """Raised when an instance file violates the on-disk schema."""


class PowerIterationError(RuntimeError):
    """Raised when power iteration fails to converge within its cap."""


@dataclass(frozen=True)
class Sector:
    """Axis-aligned box on the unit-square map. Half-open in x and y."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x < self.xmax and self.ymin <= y < self.ymax


@dataclass(frozen=True)
class Flight:
    """One flight: scheduled departure bin and its trajectory options.

    Each option is a tuple of (x, y, t) waypoints with strictly increasing
    integer time bins.
    """

    departure: int
    options: tuple[tuple[tuple[float, float, int], ...], ...]


@dataclass(frozen=True)
class CtopInstance:
    sectors: tuple[Sector, ...]
    grid: int
    horizon: int
    flights: tuple[Flight, ...]

    @property
    def n_agents(self) -> int:
        return len(self.sectors)

    @property
    def n_flights(self) -> int:
        return len(self.flights)

    @property
    def options_per_flight(self) -> int:
        return len(self.flights[0].options) if self.flights else 0

    @property
    def n_choices(self) -> int:
        return self.options_per_flight ** self.n_flights

    def validate(self) -> list[str]:
        """Collect schema/geometry violations; empty list means valid."""
        problems = []
        if not self.sectors:
            problems.append("empty sector set")
        if self.grid < 1:
            problems.append("grid must be >= 1")
        if self.horizon < 1:
            problems.append("horizon must be >= 1")
        if not self.flights:
            problems.append("empty flight set")
            return problems
        q = self.options_per_flight
        for f, flight in enumerate(self.flights):
            if len(flight.options) != q:
                problems.append(
                    f"flights[{f}]: has {len(flight.options)} options, expected {q}"
                )
            for k, traj in enumerate(flight.options):
                if not traj:
                    problems.append(f"flights[{f}].options[{k}]: empty trajectory")
                    continue
                times = [t for (_, _, t) in traj]
                if any(t1 >= t2 for t1, t2 in zip(times, times[1:])):
                    problems.append(
                        f"flights[{f}].options[{k}]: time bins not strictly increasing"
                    )
                for w, (x, y, t) in enumerate(traj):
                    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                        problems.append(
                            f"flights[{f}].options[{k}][{w}]: waypoint outside unit square"
                        )
                    if not (0 <= t < self.horizon):
                        problems.append(
                            f"flights[{f}].options[{k}][{w}]: time bin outside horizon"
                        )
                if not any(
                    s.contains(x, y) for s in self.sectors for (x, y, _) in traj
                ):
                    problems.append(
                        f"flights[{f}].options[{k}]: trajectory crosses no sector"
                    )
        return problems


def encode_bundle(bundle, q: int) -> int:
    """Mixed-radix bundle -> choice index (flight 0 is the least significant digit)."""
    idx = 0
    for digit in reversed(bundle):
        if not 0 <= digit < q:
            raise IndexError(f"option index {digit} out of range [0, {q})")
        idx = idx * q + int(digit)
    return idx


def decode_bundle(index: int, q: int, p: int) -> tuple[int, ...]:
    """Choice index -> per-flight option indices. Inverse of encode_bundle."""
    if not 0 <= index < q**p:
        raise IndexError(f"choice index {index} out of range for {q}^{p} bundles")
    digits = []
    for _ in range(p):
        index, digit = divmod(index, q)
        digits.append(digit)
    return tuple(digits)


def cell_of(x: float, y: float, grid: int) -> int:
    col = min(int(x * grid), grid - 1)
    row = min(int(y * grid), grid - 1)
    return row * grid + col


def occupancy(instance: CtopInstance, sector: int, bundle, include=None) -> np.ndarray:
    """Occupancy counts for one sector: (horizon, grid*grid) integer matrix.

    Entry (t, c) counts selected-trajectory waypoints that fall in grid cell
    c of the sector at time bin t. `include` restricts to a subset of flight
    indices (used by sequential baselines); default is all flights.
    """
    box = instance.sectors[sector]
    counts = np.zeros((instance.horizon, instance.grid * instance.grid), dtype=np.int64)
    flights = range(instance.n_flights) if include is None else include
    for f in flights:
        traj = instance.flights[f].options[bundle[f]]
        for x, y, t in traj:
            if box.contains(x, y) and 0 <= t < instance.horizon:
                counts[t, cell_of(x, y, instance.grid)] += 1
    return counts


def eigen_complexity(traffic: np.ndarray, rtol: float = 1e-9, max_iters: int = 10_000) -> float:
    """Dominant eigenvalue of the time-sampled occupancy covariance.

    Covariance is (1/T) * Xc^T Xc with column means removed. Computed by
    power iteration from a fixed seeded start vector, stopping on the
    relative residual ||Cv - lambda v|| <= rtol * lambda; the residual test
    also converges on degenerate (repeated) leading eigenvalues, where the
    iterate may keep rotating inside the top eigenspace. Constant traffic
    has zero covariance and scores 0.
    """
    x = np.asarray(traffic, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("traffic must be a (T, cells) matrix with T >= 1")
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / x.shape[0]
    if not np.any(cov):
        return 0.0
    v = np.random.default_rng(0).standard_normal(cov.shape[0])
    v /= np.linalg.norm(v)
    if not np.any(cov @ v):
        # start vector sits in the nullspace; restart from the heaviest cell
        v = np.zeros(cov.shape[0])
        v[int(np.argmax(np.diag(cov)))] = 1.0
    for _ in range(max_iters):
        y = cov @ v
        lam = float(v @ y)
        residual = float(np.linalg.norm(y - lam * v))
        if residual <= rtol * max(abs(lam), 1e-300):
            return lam
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            return 0.0
        v = y / norm
    raise PowerIterationError(f"no convergence after {max_iters} iterations")


def bundle_cost(instance: CtopInstance, sector: int, bundle) -> float:
    """Congestion cost of a bundle for one sector agent."""
    return eigen_complexity(occupancy(instance, sector, bundle))


def generate_scenario(
    n_sectors: int, n_flights: int, n_options: int, grid: int = 4, horizon: int = 8, seed: int = 0
) -> CtopInstance:
    """Reproducible synthetic instance.

    Sectors are vertical strips of the unit square. Every trajectory option
    places one waypoint per sector, left to right, with strictly increasing
    time bins, so all trajectories cross every sector. Options for a flight
    differ in waypoint placement and may be delayed by one bin.
    """
    if min(n_sectors, n_flights, n_options, grid, horizon) < 1:
        raise ValueError("all generator counts must be >= 1")
    if horizon < n_sectors + 1:
        raise ValueError("horizon too short for one waypoint per sector plus slack")
    rng = np.random.default_rng(seed)
    sectors = tuple(
        Sector(xmin=i / n_sectors, xmax=(i + 1) / n_sectors, ymin=0.0, ymax=1.0)
        for i in range(n_sectors)
    )
    flights = []
    for _ in range(n_flights):
        t0 = int(rng.integers(0, horizon - n_sectors))
        options = []
        for _ in range(n_options):
            shift = int(rng.integers(0, 2)) if t0 + n_sectors < horizon else 0
            traj = []
            for s in range(n_sectors):
                x = float(sectors[s].xmin + rng.random() / n_sectors)
                y = float(rng.random())
                traj.append((x, y, t0 + shift + s))
            options.append(tuple(traj))
        flights.append(Flight(departure=t0, options=tuple(options)))
    return CtopInstance(sectors=sectors, grid=grid, horizon=horizon, flights=tuple(flights))


def instance_to_dict(instance: CtopInstance) -> dict:
    return {
        "sectors": [
            {"xmin": s.xmin, "xmax": s.xmax, "ymin": s.ymin, "ymax": s.ymax}
            for s in instance.sectors
        ],
        "grid": instance.grid,
        "horizon": instance.horizon,
        "options": instance.options_per_flight,
        "flights": [
            {
                "departure": f.departure,
                "options": [[[x, y, t] for (x, y, t) in traj] for traj in f.options],
            }
            for f in instance.flights
        ],
    }


def instance_from_dict(data: dict) -> CtopInstance:
    for key in ("sectors", "grid", "horizon", "flights"):
        if key not in data:
            raise SchemaError(f"missing '{key}' key")
    sectors = []
    for i, s in enumerate(data["sectors"]):
        try:
            sectors.append(
                Sector(
                    xmin=float(s["xmin"]),
                    xmax=float(s["xmax"]),
                    ymin=float(s["ymin"]),
                    ymax=float(s["ymax"]),
                )
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"sectors[{i}]: {exc}") from exc
    flights = []
    for i, f in enumerate(data["flights"]):
        if "departure" not in f or "options" not in f:
            raise SchemaError(f"flights[{i}]: missing 'departure' or 'options'")
        options = []
        for k, traj in enumerate(f["options"]):
            try:
                options.append(tuple((float(x), float(y), int(t)) for x, y, t in traj))
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"flights[{i}].options[{k}]: malformed waypoint") from exc
        flights.append(Flight(departure=int(f["departure"]), options=tuple(options)))
    instance = CtopInstance(
        sectors=tuple(sectors),
        grid=int(data["grid"]),
        horizon=int(data["horizon"]),
        flights=tuple(flights),
    )
    declared_q = data.get("options")
    if declared_q is not None:
        for i, f in enumerate(instance.flights):
            if len(f.options) != int(declared_q):
                raise SchemaError(
                    f"flights[{i}]: {len(f.options)} options, header declares {declared_q}"
                )
    problems = instance.validate()
    if problems:
        raise SchemaError("; ".join(problems))
    return instance


def save_instance(instance: CtopInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(instance), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_instance(path) -> CtopInstance:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return instance_from_dict(data)
