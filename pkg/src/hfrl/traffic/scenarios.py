"""Named scenario presets and declarative scenario parsing.

The grid presets mirror the usual benchmark layouts: on the 3x3 grid the
middle row and column are four-lane corridors and everything else is a
two-lane road; on the 5x5 grid the central corridors are six-lane, their
neighbours four-lane and the outermost two-lane.

The sensitivity presets run a 3x3 grid at 300 veh/lane/h and double the
inflow at selected boundary entries:

- ``sensitivity1``: uniform (no doubling), the reference case.
- ``sensitivity2``: south entries of columns A and C (loads A0 and C0).
- ``sensitivity3``: the corner feeds of A0 and C2 (diagonally opposite).
- ``sensitivity4``: north and south entries of column B (loads B0 and B2).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Mapping

from .demand import DemandSpec
from .network import CENTRAL, MAJOR, MINOR, NetworkError, NetworkSpec
from .simulate import SimParams

LIGHT_INFLOW_VPH = 200.0
HEAVY_INFLOW_VPH = 400.0
SENSITIVITY_INFLOW_VPH = 300.0


@dataclass(frozen=True)
class Scenario:
    name: str
    network: NetworkSpec
    demand: DemandSpec
    sim: SimParams


def _tiers(n: int) -> tuple[str, ...]:
    if n == 1:
        return (MINOR,)
    if n == 3:
        return (MINOR, MAJOR, MINOR)
    if n == 5:
        return (MINOR, MAJOR, CENTRAL, MAJOR, MINOR)
    return tuple(MINOR for _ in range(n))


def _grid(rows: int, cols: int, inflow: float, multipliers: Mapping[str, float] | None = None) -> tuple[NetworkSpec, DemandSpec]:
    net = NetworkSpec(rows=rows, cols=cols, ns_classes=_tiers(cols), ew_classes=_tiers(rows))
    dem = DemandSpec(
        inflow_per_lane_vph=inflow,
        demand_multipliers=dict(multipliers or {}),
    )
    return net, dem


def _make(name: str, rows: int, cols: int, inflow: float, multipliers: Mapping[str, float] | None = None) -> Scenario:
    net, dem = _grid(rows, cols, inflow, multipliers)
    return Scenario(name=name, network=net, demand=dem, sim=SimParams())


_FACTORIES: dict[str, Callable[[], Scenario]] = {
    "grid1x1": lambda: _make("grid1x1", 1, 1, LIGHT_INFLOW_VPH),
    "grid3x3": lambda: _make("grid3x3", 3, 3, LIGHT_INFLOW_VPH),
    "grid3x3-heavy": lambda: _make("grid3x3-heavy", 3, 3, HEAVY_INFLOW_VPH),
    "grid5x5": lambda: _make("grid5x5", 5, 5, LIGHT_INFLOW_VPH),
    "grid5x5-heavy": lambda: _make("grid5x5-heavy", 5, 5, HEAVY_INFLOW_VPH),
    "grid3x3-hetero4x": lambda: _make(
        "grid3x3-hetero4x", 3, 3, LIGHT_INFLOW_VPH, {"S:0": 4.0, "N:2": 4.0}
    ),
    "sensitivity1": lambda: _make("sensitivity1", 3, 3, SENSITIVITY_INFLOW_VPH),
    "sensitivity2": lambda: _make(
        "sensitivity2", 3, 3, SENSITIVITY_INFLOW_VPH, {"S:0": 2.0, "S:2": 2.0}
    ),
    "sensitivity3": lambda: _make(
        "sensitivity3", 3, 3, SENSITIVITY_INFLOW_VPH,
        {"S:0": 2.0, "W:0": 2.0, "N:2": 2.0, "E:2": 2.0},
    ),
    "sensitivity4": lambda: _make(
        "sensitivity4", 3, 3, SENSITIVITY_INFLOW_VPH, {"S:1": 2.0, "N:1": 2.0}
    ),
}


def scenario_names() -> list[str]:
    return sorted(_FACTORIES)


def get_scenario(name: str) -> Scenario:
    if name not in _FACTORIES:
        raise NetworkError(f"unknown scenario {name!r}; available: {scenario_names()}")
    return _FACTORIES[name]()


def scenario_from_dict(table: Mapping) -> Scenario:
    """Build a scenario from a parsed config table.

    Starts from the preset named by ``base`` (default ``grid3x3``) and
    applies any overrides present: ``rows``/``cols``, ``inflow_per_lane_vph``,
    ``turn_ratios``, ``demand_multipliers``, ``lane_length_m``,
    ``speed_limit_mps`` plus any :class:`SimParams` field.
    """
    base = get_scenario(str(table.get("base", "grid3x3")))
    net = base.network
    dem = base.demand
    sim = base.sim

    if "rows" in table or "cols" in table:
        rows = int(table.get("rows", net.rows))
        cols = int(table.get("cols", net.cols))
        net = NetworkSpec(
            rows=rows,
            cols=cols,
            ns_classes=_tiers(cols),
            ew_classes=_tiers(rows),
            lane_length_m=net.lane_length_m,
            speed_limit_mps=net.speed_limit_mps,
        )
    net_fields = {k: table[k] for k in ("lane_length_m", "speed_limit_mps") if k in table}
    if net_fields:
        net = replace(net, **{k: float(v) for k, v in net_fields.items()})

    if "inflow_per_lane_vph" in table:
        dem = replace(dem, inflow_per_lane_vph=float(table["inflow_per_lane_vph"]))
    if "turn_ratios" in table:
        dem = replace(dem, turn_ratios=tuple(float(x) for x in table["turn_ratios"]))
    if "demand_multipliers" in table:
        dem = replace(
            dem,
            demand_multipliers={str(k): float(v) for k, v in dict(table["demand_multipliers"]).items()},
        )

    sim_fields = {
        k: float(table[k])
        for k in (
            "dt_s",
            "saturation_flow_vphpl",
            "jam_spacing_m",
            "halt_speed_mps",
            "min_green_s",
            "max_green_s",
            "yellow_s",
        )
        if k in table
    }
    if sim_fields:
        sim = replace(sim, **sim_fields)

    name = str(table.get("name", base.name + "-custom"))
    return Scenario(name=name, network=net, demand=dem, sim=sim)
