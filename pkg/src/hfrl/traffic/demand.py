"""Seeded demand scheduling.

Arrivals at each boundary entry follow an exponential inter-arrival
process (Poisson counts over the horizon).  A spawn event carries the
vehicle's entire route, drawn turn by turn at scheduling time, so the
simulation itself never consumes randomness for routing.

Every entry link gets an independent substream derived from the schedule
seed and the entry's canonical index, which keeps schedules reproducible
when demand at one entry changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .network import Link, LinkKey, Network, NetworkError, TURN_TABLE

# Longest route worth drawing turns for; beyond this the walk goes
# straight until it leaves the grid (pure right-turn cycles are the only
# way to get here and they are vanishingly rare).
_MAX_TURN_DRAWS = 128


class DemandError(ValueError):
    pass


@dataclass(frozen=True)
class DemandSpec:
    """Boundary inflow and routing behaviour.

    ``inflow_per_lane_vph`` is vehicles per lane per hour at every
    boundary entry before multipliers.  ``demand_multipliers`` scales
    individual entries, keyed like ``"S:0"`` (south portal, column 0).
    ``turn_ratios`` is (straight, right, left) per intersection crossing.
    """

    inflow_per_lane_vph: float
    turn_ratios: tuple[float, float, float] = (0.9, 0.1, 0.0)
    demand_multipliers: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.inflow_per_lane_vph < 0:
            raise DemandError("inflow_per_lane_vph must be non-negative")
        if len(self.turn_ratios) != 3 or any(r < 0 for r in self.turn_ratios):
            raise DemandError("turn_ratios must be three non-negative numbers")
        if abs(sum(self.turn_ratios) - 1.0) > 1e-9:
            raise DemandError(f"turn_ratios must sum to 1, got {sum(self.turn_ratios)}")
        for factor in self.demand_multipliers.values():
            if factor < 0:
                raise DemandError("demand multipliers must be non-negative")


@dataclass(frozen=True)
class SpawnEvent:
    vid: int
    time_s: float
    entry_key: str
    link_key: LinkKey
    route: tuple[LinkKey, ...]


def _validate_multipliers(network: Network, demand: DemandSpec) -> None:
    valid = {network.entry_key_of(link) for link in network.entry_links}
    unknown = set(demand.demand_multipliers) - valid
    if unknown:
        raise DemandError(
            f"unknown entry keys {sorted(unknown)}; valid entries are {sorted(valid)}"
        )


def _draw_route(network: Network, entry: Link, rng: np.random.Generator, ratios: tuple[float, float, float]) -> tuple[LinkKey, ...]:
    """Walk from the entry link until a portal, drawing one turn per crossing."""
    p_straight, p_right, _ = ratios
    route = [entry.key]
    link = entry
    draws = 0
    while link.enters_intersection:
        if draws < _MAX_TURN_DRAWS:
            u = rng.random()
            if u < p_straight:
                turn = "straight"
            elif u < p_straight + p_right:
                turn = "right"
            else:
                turn = "left"
            draws += 1
        else:
            turn = "straight"
        link = network.movement_target(link, turn)
        route.append(link.key)
    return tuple(route)


def schedule_demand(
    network: Network,
    demand: DemandSpec,
    seed: int,
    horizon_s: float,
) -> list[SpawnEvent]:
    """Draw all spawn events for one episode.

    Events are sorted by time and numbered; the id order is the insertion
    order the simulation will attempt.
    """
    if horizon_s < 0:
        raise DemandError("horizon_s must be non-negative")
    _validate_multipliers(network, demand)

    entries = sorted(network.entry_links, key=lambda l: l.key)
    raw: list[tuple[float, int, int, str, Link, tuple[LinkKey, ...]]] = []
    for entry_index, entry in enumerate(entries):
        entry_key = network.entry_key_of(entry)
        factor = float(demand.demand_multipliers.get(entry_key, 1.0))
        rate_vph = demand.inflow_per_lane_vph * factor * entry.n_lanes
        if rate_vph <= 0:
            continue
        rng = np.random.default_rng(np.random.SeedSequence((seed, entry_index)))
        mean_gap = 3600.0 / rate_vph
        t = rng.exponential(mean_gap)
        seq = 0
        while t < horizon_s:
            route = _draw_route(network, entry, rng, demand.turn_ratios)
            raw.append((t, entry_index, seq, entry_key, entry, route))
            seq += 1
            t += rng.exponential(mean_gap)

    raw.sort(key=lambda item: (item[0], item[1], item[2]))
    return [
        SpawnEvent(vid=i, time_s=t, entry_key=ek, link_key=entry.key, route=route)
        for i, (t, _idx, _seq, ek, entry, route) in enumerate(raw)
    ]


def turn_between(dir_in: str, dir_out: str) -> str:
    """Inverse of the turn table: which turn maps dir_in onto dir_out."""
    for turn, d in TURN_TABLE[dir_in].items():
        if d == dir_out:
            return turn
    raise NetworkError(f"no turn connects {dir_in} to {dir_out}")
