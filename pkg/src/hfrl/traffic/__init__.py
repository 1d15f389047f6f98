from .network import (
    LANES_PER_DIRECTION,
    MINOR,
    MAJOR,
    CENTRAL,
    Link,
    Intersection,
    Network,
    NetworkSpec,
    build_network,
)
from .demand import DemandSpec, SpawnEvent, schedule_demand
from .simulate import (
    NS_GREEN,
    NS_YELLOW,
    EW_GREEN,
    EW_YELLOW,
    Observation,
    SimParams,
    SimState,
    SignalState,
    Vehicle,
    build_sim,
    conservation_counts,
    local_reward,
    observe,
    snapshot,
    step,
)
from .scenarios import Scenario, get_scenario, scenario_names

__all__ = [
    "LANES_PER_DIRECTION",
    "MINOR",
    "MAJOR",
    "CENTRAL",
    "Link",
    "Intersection",
    "Network",
    "NetworkSpec",
    "build_network",
    "DemandSpec",
    "SpawnEvent",
    "schedule_demand",
    "NS_GREEN",
    "NS_YELLOW",
    "EW_GREEN",
    "EW_YELLOW",
    "Observation",
    "SimParams",
    "SimState",
    "SignalState",
    "Vehicle",
    "build_sim",
    "conservation_counts",
    "local_reward",
    "observe",
    "snapshot",
    "step",
    "Scenario",
    "get_scenario",
    "scenario_names",
]
