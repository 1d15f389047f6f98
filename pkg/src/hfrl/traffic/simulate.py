"""Queue-server traffic dynamics on a signalised grid.

Unit conventions: distances in metres, times in seconds, speeds in m/s.
Positions measure distance travelled along the current link, so the stop
line sits at ``link.length_m``.

Each step advances the world by ``dt_s`` in a fixed order:

1. signal logic (so a phase set this step controls this step's movement),
2. discharge credit accrual,
3. vehicle movement, swept in sorted lane order and front to back within
   a lane,
4. insertion of due and previously blocked spawns,
5. clock advance.

Movement is kinematically exact: a vehicle advances ``speed_limit * dt``
unless blocked by its leader (jam spacing), the stop line, or a full
downstream lane.  A vehicle that reaches the stop line with a green
signal, discharge credit and downstream space crosses within the same
step and keeps its leftover movement, so free-flow travel times come out
closed-form.  Discharge credit accrues at the saturation rate during
green only and is capped at one vehicle, which caps each lane's discharge
at the saturation flow.

Everything is deterministic given the spawn schedule: the sweep order is
sorted, and no randomness is consumed after scheduling.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .demand import DemandSpec, SpawnEvent, schedule_demand, turn_between
from .network import Link, LinkKey, Network, intersection_name

NS_GREEN, NS_YELLOW, EW_GREEN, EW_YELLOW = 0, 1, 2, 3
PHASE_NAMES = ("NS_GREEN", "NS_YELLOW", "EW_GREEN", "EW_YELLOW")

_GREEN_DIRS = {NS_GREEN: ("N", "S"), EW_GREEN: ("E", "W")}
_YELLOW_DIRS = {NS_YELLOW: ("N", "S"), EW_YELLOW: ("E", "W")}


class SimError(ValueError):
    pass


@dataclass(frozen=True)
class SimParams:
    dt_s: float = 1.0
    saturation_flow_vphpl: float = 1800.0
    jam_spacing_m: float = 7.5
    halt_speed_mps: float = 0.1
    min_green_s: float = 4.0
    max_green_s: float = 120.0
    yellow_s: float = 3.0

    def __post_init__(self) -> None:
        if self.dt_s <= 0:
            raise SimError("dt_s must be positive")
        if self.saturation_flow_vphpl <= 0:
            raise SimError("saturation flow must be positive")
        if self.jam_spacing_m <= 0:
            raise SimError("jam spacing must be positive")
        if self.min_green_s < 0 or self.yellow_s < 0:
            raise SimError("phase durations must be non-negative")
        if self.max_green_s < self.min_green_s:
            raise SimError("max_green_s must be at least min_green_s")

    @property
    def sat_rate_vps(self) -> float:
        return self.saturation_flow_vphpl / 3600.0


@dataclass
class SignalState:
    phase: int = NS_GREEN
    time_in_phase_s: float = 0.0


@dataclass
class Vehicle:
    vid: int
    route: tuple[LinkKey, ...]
    route_pos: int
    link_key: LinkKey
    lane_idx: int
    position_m: float
    speed_mps: float
    spawn_time_s: float
    depart_time_s: float
    waiting_steps: int = 0
    arrival_time_s: float | None = None
    last_moved: int = -1


@dataclass
class LaneState:
    # index 0 is closest to the stop line; appended vehicles join the back
    vehicles: list[Vehicle] = field(default_factory=list)
    discharge_credit: float = 0.0


@dataclass
class Observation:
    """Aggregate view of one intersection's approach lanes."""

    occupancy: float
    queue_ratio: float
    avg_speed: float
    phase_encoding: tuple[float, float, float]

    DIM = 6

    def as_vector(self) -> np.ndarray:
        g, y, r = self.phase_encoding
        return np.array(
            [self.occupancy, self.queue_ratio, self.avg_speed, g, y, r], dtype=np.float64
        )


@dataclass
class SimState:
    network: Network
    params: SimParams
    signals: dict[str, SignalState]
    lanes: dict[tuple[LinkKey, int], LaneState]
    capacity: dict[LinkKey, int]
    schedule: list[SpawnEvent]
    clock_s: float = 0.0
    step_index: int = 0
    sched_ptr: int = 0
    spawned_due: int = 0
    pending: dict[LinkKey, deque] = field(default_factory=dict)
    completed: list[Vehicle] = field(default_factory=list)
    last_discharge_s: dict[str, float] = field(default_factory=dict)
    vehicle_steps: int = 0

    @property
    def lane_order(self) -> list[tuple[LinkKey, int]]:
        return list(self.lanes)

    def active_vehicles(self) -> list[Vehicle]:
        out: list[Vehicle] = []
        for lane in self.lanes.values():
            out.extend(lane.vehicles)
        return out

    def pending_count(self) -> int:
        return sum(len(q) for q in self.pending.values())


def build_sim(
    network: Network,
    params: SimParams,
    demand: DemandSpec,
    seed: int,
    horizon_s: float,
) -> SimState:
    """Fresh simulation state with the episode's full spawn schedule."""

    capacity: dict[LinkKey, int] = {}
    for key, link in network.links.items():
        cap = math.floor(link.length_m / params.jam_spacing_m)
        if cap < 1:
            raise SimError(
                f"link {key} shorter than one jam spacing ({link.length_m} m < {params.jam_spacing_m} m)"
            )
        if link.speed_limit_mps * params.dt_s > link.length_m:
            raise SimError(
                f"link {key}: one step of movement exceeds the link length; lower dt or speed"
            )
        capacity[key] = cap

    lanes = {
        (key, li): LaneState()
        for key in sorted(network.links)
        for li in range(network.links[key].n_lanes)
    }
    signals = {name: SignalState() for name in network.names}
    schedule = schedule_demand(network, demand, seed, horizon_s)
    return SimState(
        network=network,
        params=params,
        signals=signals,
        lanes=lanes,
        capacity=capacity,
        schedule=schedule,
        pending={},
        last_discharge_s={name: -math.inf for name in network.names},
    )


def _intersection_of(state: SimState, link: Link) -> str:
    return intersection_name(link.to_node[1], link.to_node[2])


def _is_green(state: SimState, link: Link) -> bool:
    sig = state.signals[_intersection_of(state, link)]
    return link.direction in _GREEN_DIRS.get(sig.phase, ())


def _lane_can_accept(state: SimState, link: Link, lane_idx: int) -> bool:
    lane = state.lanes[(link.key, lane_idx)]
    if len(lane.vehicles) >= state.capacity[link.key]:
        return False
    if lane.vehicles and lane.vehicles[-1].position_m < state.params.jam_spacing_m:
        return False
    return True


def _turn_at_link_end(state: SimState, route: tuple[LinkKey, ...], idx: int) -> str:
    link = state.network.links[route[idx]]
    if not link.enters_intersection or idx + 1 >= len(route):
        return "straight"
    nxt = state.network.links[route[idx + 1]]
    return turn_between(link.direction, nxt.direction)


def _choose_lane(state: SimState, link: Link, route: tuple[LinkKey, ...], idx: int) -> int | None:
    """Lane to use on ``link`` given the turn at its far end.

    Right turns are only served from the rightmost (index 0) lane and left
    turns from the leftmost; through traffic takes the emptiest lane.
    Returns None when every allowed lane is full.
    """
    turn = _turn_at_link_end(state, route, idx)
    if turn == "right":
        candidates: Sequence[int] = (0,)
    elif turn == "left":
        candidates = (link.n_lanes - 1,)
    else:
        candidates = sorted(
            range(link.n_lanes),
            key=lambda i: (len(state.lanes[(link.key, i)].vehicles), i),
        )
    for lane_idx in candidates:
        if _lane_can_accept(state, link, lane_idx):
            return lane_idx
    return None


def _try_cross(state: SimState, veh: Vehicle, link: Link, lane: LaneState, budget: float) -> float | None:
    """Move ``veh`` through the intersection; returns its entry position
    on the downstream lane, or None when the crossing is not possible."""
    p = state.params
    if not _is_green(state, link):
        return None
    if lane.discharge_credit < 1.0:
        return None
    next_key = veh.route[veh.route_pos + 1]
    target = state.network.links[next_key]
    lane_idx = _choose_lane(state, target, veh.route, veh.route_pos + 1)
    if lane_idx is None:
        return None

    leftover = veh.position_m + budget - link.length_m
    tlane = state.lanes[(next_key, lane_idx)]
    if tlane.vehicles:
        entry = min(leftover, tlane.vehicles[-1].position_m - p.jam_spacing_m)
    else:
        entry = leftover
    entry = max(0.0, entry)

    lane.vehicles.remove(veh)
    lane.discharge_credit -= 1.0
    veh.link_key = next_key
    veh.lane_idx = lane_idx
    veh.position_m = entry
    veh.route_pos += 1
    tlane.vehicles.append(veh)
    state.last_discharge_s[_intersection_of(state, link)] = state.clock_s + p.dt_s
    return entry


def step(state: SimState, actions: Mapping[str, int]) -> None:
    """Advance the world by one ``dt_s``.

    ``actions`` maps intersection name to 0 (stay) or 1 (request a phase
    switch); omitted intersections stay.  Action semantics: a switch
    request during green is honoured once ``min_green_s`` has elapsed,
    greens are force-ended at ``max_green_s``, and yellows run their fixed
    duration regardless of the action.
    """
    p = state.params
    net = state.network

    unknown = set(actions) - set(state.signals)
    if unknown:
        raise SimError(f"actions for unknown intersections: {sorted(unknown)}")

    for name in sorted(state.signals):
        sig = state.signals[name]
        a = int(actions.get(name, 0))
        if a not in (0, 1):
            raise SimError(f"action for {name} must be 0 or 1, got {a}")
        if sig.phase in _GREEN_DIRS:
            if sig.time_in_phase_s >= p.max_green_s or (
                a == 1 and sig.time_in_phase_s >= p.min_green_s
            ):
                sig.phase = (sig.phase + 1) % 4
                sig.time_in_phase_s = 0.0
        else:
            if sig.time_in_phase_s >= p.yellow_s:
                sig.phase = (sig.phase + 1) % 4
                sig.time_in_phase_s = 0.0

    for (key, _li), lane in state.lanes.items():
        link = net.links[key]
        if not link.enters_intersection:
            continue
        if _is_green(state, link):
            lane.discharge_credit = min(lane.discharge_credit + p.sat_rate_vps * p.dt_s, 1.0)
        else:
            lane.discharge_credit = 0.0

    state.step_index += 1
    token = state.step_index
    state.vehicle_steps += sum(len(l.vehicles) for l in state.lanes.values())

    for lane_key in state.lane_order:
        lane = state.lanes[lane_key]
        link = net.links[lane_key[0]]
        prev: Vehicle | None = None
        for veh in list(lane.vehicles):
            if veh.last_moved == token:
                # crossed in from upstream during this sweep; acts as a leader only
                prev = veh
                continue
            veh.last_moved = token
            budget = link.speed_limit_mps * p.dt_s
            start = veh.position_m

            if prev is not None:
                new_pos = max(start, min(start + budget, prev.position_m - p.jam_spacing_m))
                veh.position_m = new_pos
                moved = new_pos - start
                prev = veh
            elif not link.enters_intersection:
                if start + budget >= link.length_m:
                    lane.vehicles.remove(veh)
                    veh.arrival_time_s = state.clock_s + p.dt_s
                    veh.speed_mps = link.speed_limit_mps
                    state.completed.append(veh)
                    continue
                veh.position_m = start + budget
                moved = budget
                prev = veh
            elif start + budget < link.length_m:
                veh.position_m = start + budget
                moved = budget
                prev = veh
            elif (entry := _try_cross(state, veh, link, lane, budget)) is not None:
                moved = (link.length_m - start) + entry
                # the lane behind the stop line is open again; prev stays None
            else:
                veh.position_m = link.length_m
                moved = link.length_m - start
                prev = veh

            veh.speed_mps = moved / p.dt_s
            if veh.speed_mps <= p.halt_speed_mps:
                veh.waiting_steps += 1

    _insert_spawns(state, token)

    state.clock_s += p.dt_s
    for sig in state.signals.values():
        sig.time_in_phase_s += p.dt_s


def _insert_one(state: SimState, ev: SpawnEvent, token: int) -> bool:
    link = state.network.links[ev.link_key]
    lane_idx = _choose_lane(state, link, ev.route, 0)
    if lane_idx is None:
        return False
    veh = Vehicle(
        vid=ev.vid,
        route=ev.route,
        route_pos=0,
        link_key=ev.link_key,
        lane_idx=lane_idx,
        position_m=0.0,
        speed_mps=link.speed_limit_mps,
        spawn_time_s=ev.time_s,
        depart_time_s=state.clock_s + state.params.dt_s,
        last_moved=token,
    )
    state.lanes[(ev.link_key, lane_idx)].vehicles.append(veh)
    return True


def _insert_spawns(state: SimState, token: int) -> None:
    # blocked spawns first, in FIFO order per entry
    for key in sorted(state.pending):
        queue = state.pending[key]
        while queue and _insert_one(state, queue[0], token):
            queue.popleft()

    horizon = state.clock_s + state.params.dt_s
    while state.sched_ptr < len(state.schedule) and state.schedule[state.sched_ptr].time_s < horizon:
        ev = state.schedule[state.sched_ptr]
        state.sched_ptr += 1
        state.spawned_due += 1
        queue = state.pending.setdefault(ev.link_key, deque())
        if queue or not _insert_one(state, ev, token):
            queue.append(ev)


def observe(state: SimState, name: str) -> Observation:
    """Aggregate occupancy, queue, speed and phase over the approach lanes."""
    if name not in state.network.intersections:
        raise SimError(f"unknown intersection {name!r}")
    inter = state.network.intersections[name]
    sig = state.signals[name]
    p = state.params

    lane_n = 0
    occ = 0.0
    queue = 0.0
    speed_sum = 0.0
    veh_n = 0
    green_lanes = 0
    yellow_lanes = 0
    for dirn in sorted(inter.approaches):
        link = inter.approaches[dirn]
        cap = state.capacity[link.key]
        served_green = dirn in _GREEN_DIRS.get(sig.phase, ())
        served_yellow = dirn in _YELLOW_DIRS.get(sig.phase, ())
        for li in range(link.n_lanes):
            lane = state.lanes[(link.key, li)]
            occ += len(lane.vehicles) / cap
            queue += sum(1 for v in lane.vehicles if v.speed_mps <= p.halt_speed_mps) / cap
            lane_n += 1
            if served_green:
                green_lanes += 1
            elif served_yellow:
                yellow_lanes += 1
            for v in lane.vehicles:
                speed_sum += v.speed_mps / link.speed_limit_mps
                veh_n += 1

    avg_speed = speed_sum / veh_n if veh_n else 1.0
    g = green_lanes / lane_n
    y = yellow_lanes / lane_n
    return Observation(
        occupancy=occ / lane_n,
        queue_ratio=queue / lane_n,
        avg_speed=avg_speed,
        phase_encoding=(g, y, 1.0 - g - y),
    )


def local_reward(state: SimState, name: str) -> float:
    """Congestion penalty ``-(occupancy + queue_ratio)^2``, in [-4, 0]."""
    obs = observe(state, name)
    return -((obs.occupancy + obs.queue_ratio) ** 2)


def conservation_counts(state: SimState) -> tuple[int, int, int, int]:
    """(spawned_due, active, completed, pending) for conservation checks."""
    active = sum(len(l.vehicles) for l in state.lanes.values())
    return state.spawned_due, active, len(state.completed), state.pending_count()


def snapshot(state: SimState) -> tuple:
    """Deep, hashable view of the dynamic state; equal iff states match bit for bit."""
    vehicles = tuple(
        (key[0], key[1], tuple((v.vid, v.position_m, v.speed_mps, v.route_pos, v.waiting_steps) for v in lane.vehicles))
        for key, lane in state.lanes.items()
    )
    signals = tuple((n, s.phase, s.time_in_phase_s) for n, s in sorted(state.signals.items()))
    credits = tuple((key[0], key[1], lane.discharge_credit) for key, lane in state.lanes.items())
    done = tuple((v.vid, v.depart_time_s, v.arrival_time_s) for v in state.completed)
    pending = tuple((k, tuple(ev.vid for ev in q)) for k, q in sorted(state.pending.items()))
    return (state.clock_s, state.step_index, state.spawned_due, signals, credits, vehicles, done, pending)
