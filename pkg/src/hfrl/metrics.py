"""Performance and communication metrics.

Traffic quality is summarised from completed trips: travel time is the
span from actual network entry to arrival, waiting time is the number of
control steps a vehicle spent effectively stopped times the step length.

Communication cost is an accounting model over five message kinds, each
with a fixed wire size:

    1. parameter uploads      (agent -> server, per round)
    2. parameter downloads    (server -> agent, per round)
    3. action messages        (controller -> signal head, per step)
    4. observation messages   (sensors -> controller, per step)
    5. completed-trip reports (detector -> logger, per finished vehicle)

Architecture changes which components exist and over how many hops:
federated runs pay 1-5; a centralized controller pays no parameter
traffic but hauls every observation to the centre and every action back,
doubling 3 and 4; purely local controllers (fixed-time, actuated, or
non-sharing learners) pay 3-5 once.  Costs are linear in the counts, so
windows can be summed freely.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .traffic.simulate import SimState

ARCHITECTURES = ("federated", "centralized", "decentralized")


def architecture_of(method: str) -> str:
    """Map a control method name onto its communication architecture."""
    if method in ("fedavg", "cluster", "fomo"):
        return "federated"
    if method == "centralized":
        return "centralized"
    if method in ("decentralized", "fixed", "actuated", "none"):
        return "decentralized"
    raise ValueError(f"unknown method {method!r}")


# -- trip quality ---------------------------------------------------------


@dataclass(frozen=True)
class TripStats:
    count: int
    mean_s: float
    median_s: float
    p90_s: float
    max_s: float


def trip_stats(values: Sequence[float] | np.ndarray) -> TripStats:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        nan = float("nan")
        return TripStats(count=0, mean_s=nan, median_s=nan, p90_s=nan, max_s=nan)
    return TripStats(
        count=int(arr.size),
        mean_s=float(arr.mean()),
        median_s=float(np.median(arr)),
        p90_s=float(np.percentile(arr, 90)),
        max_s=float(arr.max()),
    )


def travel_times(state: SimState, include_entry_wait: bool = False) -> np.ndarray:
    """Trip durations in seconds for every completed vehicle.

    With ``include_entry_wait`` the clock starts at the scheduled spawn
    instead of the actual entry, charging time spent queueing outside.
    """
    out = []
    for veh in state.completed:
        start = veh.spawn_time_s if include_entry_wait else veh.depart_time_s
        out.append(veh.arrival_time_s - start)
    return np.asarray(out, dtype=np.float64)


def waiting_times(state: SimState) -> np.ndarray:
    """Seconds each completed vehicle spent stopped or crawling."""
    dt = state.params.dt_s
    return np.asarray([veh.waiting_steps * dt for veh in state.completed], dtype=np.float64)


def travel_time_stats(state: SimState, include_entry_wait: bool = False) -> TripStats:
    return trip_stats(travel_times(state, include_entry_wait=include_entry_wait))


def waiting_time_stats(state: SimState) -> TripStats:
    return trip_stats(waiting_times(state))


# -- communication accounting ---------------------------------------------


@dataclass(frozen=True)
class CommCostModel:
    """Wire size of each message kind, in bytes."""

    bytes_per_obs: int = 32
    bytes_per_action: int = 4
    bytes_per_report: int = 16
    bytes_per_param: int = 4


@dataclass(frozen=True)
class CommBreakdown:
    upload_bytes: int
    download_bytes: int
    action_bytes: int
    obs_bytes: int
    report_bytes: int

    @property
    def total_bytes(self) -> int:
        return (
            self.upload_bytes
            + self.download_bytes
            + self.action_bytes
            + self.obs_bytes
            + self.report_bytes
        )

    def as_dict(self) -> dict:
        d = asdict(self)
        d["total_bytes"] = self.total_bytes
        return d


def comm_cost(
    architecture: str,
    n_agents: int,
    steps: int,
    completed_trips: int,
    rounds: int = 0,
    param_dim: int = 0,
    model: CommCostModel = CommCostModel(),
) -> CommBreakdown:
    """Bytes moved during a window, split by component (see module docstring)."""
    if architecture not in ARCHITECTURES:
        raise ValueError(f"architecture must be one of {ARCHITECTURES}, got {architecture!r}")
    for name, value in (
        ("n_agents", n_agents),
        ("steps", steps),
        ("completed_trips", completed_trips),
        ("rounds", rounds),
        ("param_dim", param_dim),
    ):
        if value < 0:
            raise ValueError(f"{name} must be non-negative")

    hops = 2 if architecture == "centralized" else 1
    if architecture == "federated":
        upload = rounds * n_agents * param_dim * model.bytes_per_param
        download = rounds * n_agents * param_dim * model.bytes_per_param
    else:
        upload = download = 0
    return CommBreakdown(
        upload_bytes=int(upload),
        download_bytes=int(download),
        action_bytes=int(hops * steps * n_agents * model.bytes_per_action),
        obs_bytes=int(hops * steps * n_agents * model.bytes_per_obs),
        report_bytes=int(completed_trips * model.bytes_per_report),
    )


def add_breakdowns(a: CommBreakdown, b: CommBreakdown) -> CommBreakdown:
    return CommBreakdown(
        upload_bytes=a.upload_bytes + b.upload_bytes,
        download_bytes=a.download_bytes + b.download_bytes,
        action_bytes=a.action_bytes + b.action_bytes,
        obs_bytes=a.obs_bytes + b.obs_bytes,
        report_bytes=a.report_bytes + b.report_bytes,
    )


# -- episode records and CSV emission --------------------------------------


@dataclass(frozen=True)
class EpisodeRecord:
    """One training or evaluation episode, flattened for CSV."""

    method: str
    seed: int
    episode: int
    phase: str            # "train" or "eval"
    round: int            # federation rounds completed when the episode ended
    steps: int
    spawned: int
    completed: int
    mean_travel_s: float
    mean_wait_s: float
    mean_reward: float
    comm_upload_bytes: int
    comm_download_bytes: int
    comm_action_bytes: int
    comm_obs_bytes: int
    comm_report_bytes: int
    comm_total_bytes: int


def write_csv(path: str | Path, rows: Iterable, fieldnames: Sequence[str] | None = None) -> None:
    """Write dataclass instances or dicts as CSV with a header row.

    NaN floats are emitted as empty cells so spreadsheet tools read them
    as missing rather than as the string "nan".
    """
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to write")
    if fieldnames is None:
        first = rows[0]
        fieldnames = [f.name for f in fields(first)] if hasattr(first, "__dataclass_fields__") else list(first)

    def cell(value):
        if isinstance(value, float) and math.isnan(value):
            return ""
        return value

    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames))
        writer.writeheader()
        for row in rows:
            d = asdict(row) if hasattr(row, "__dataclass_fields__") else dict(row)
            writer.writerow({k: cell(d[k]) for k in fieldnames})
