"""Non-learning signal controllers used as comparison baselines.

Both are local controllers: they read only their own intersection's
signal head and stop-line detectors, the same information a street
cabinet has.  They emit the same 0/1 keep-or-switch actions the learning
agents do, and the simulator applies identical minimum-green, maximum-
green, and yellow constraints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..traffic.simulate import _GREEN_DIRS, SimState


@dataclass
class FixedTimeController:
    """Requests a switch once the running green reaches ``green_s``."""

    green_s: float = 42.0

    def __post_init__(self) -> None:
        if self.green_s <= 0:
            raise ValueError("green_s must be positive")

    def act(self, state: SimState, name: str) -> int:
        sig = state.signals[name]
        if sig.phase in _GREEN_DIRS and sig.time_in_phase_s >= self.green_s:
            return 1
        return 0


@dataclass
class ActuatedController:
    """Gap-out control from stop-line presence detectors.

    Green holds while vehicles keep arriving within ``detector_m`` of the
    stop line on any served approach lane and requests a switch after the
    detectors have been clear for ``gap_s`` seconds.  A fresh green starts
    with the timer reset, so the simulator's minimum green is always
    respected before a gap-out can land.
    """

    gap_s: float = 3.0
    detector_m: float = 15.0
    _last_presence: dict[str, float] = field(default_factory=dict)
    _last_phase: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.gap_s <= 0 or self.detector_m <= 0:
            raise ValueError("gap_s and detector_m must be positive")

    def act(self, state: SimState, name: str) -> int:
        sig = state.signals[name]
        served = _GREEN_DIRS.get(sig.phase)
        if served is None:  # yellow: nothing to decide
            self._last_presence.pop(name, None)
            return 0
        if self._last_phase.get(name) != sig.phase:
            self._last_phase[name] = sig.phase
            self._last_presence[name] = state.clock_s

        present = False
        inter = state.network.intersections[name]
        for dirn in served:
            link = inter.approaches.get(dirn)
            if link is None:
                continue
            for lane_idx in range(link.n_lanes):
                lane = state.lanes[(link.key, lane_idx)]
                if any(link.length_m - veh.position_m <= self.detector_m for veh in lane.vehicles):
                    present = True
                    break
            if present:
                break

        if present:
            self._last_presence[name] = state.clock_s
            return 0
        if state.clock_s - self._last_presence.get(name, state.clock_s) >= self.gap_s:
            return 1
        return 0
