"""Grid network topology for signalised intersections.

A network is a rows x cols grid of intersections joined by two-way roads.
Every road belongs to a whole corridor (one column for vertical roads, one
row for horizontal roads) and the corridor's road class fixes the lane
count per travel direction.  Boundary stubs extend each corridor past the
outermost intersections; vehicles enter and leave the network through
portal nodes at the ends of those stubs.

Link keys are plain tuples so that dictionaries built over them iterate in
a stable, sortable order: ``("v", col, slot, direction)`` for vertical
segments and ``("h", row, slot, direction)`` for horizontal ones.  Slot
``j`` of a vertical corridor connects grid row ``j - 1`` to grid row ``j``
(portals at ``j = 0`` and ``j = rows``); horizontal slots work the same
way along a row.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

MINOR = "minor-2lane"
MAJOR = "major-4lane"
CENTRAL = "central-6lane"

ROAD_CLASSES = (MINOR, MAJOR, CENTRAL)

# Lane count per travel direction; a "two-way, four-lane road" has two
# lanes in each direction.
LANES_PER_DIRECTION: Mapping[str, int] = {MINOR: 1, MAJOR: 2, CENTRAL: 3}

# Travel directions.  "N" means the vehicle is heading north.
DIRECTIONS = ("N", "S", "E", "W")

# turn -> outgoing travel direction, keyed by incoming travel direction.
TURN_TABLE = {
    "N": {"straight": "N", "right": "E", "left": "W"},
    "S": {"straight": "S", "right": "W", "left": "E"},
    "E": {"straight": "E", "right": "S", "left": "N"},
    "W": {"straight": "W", "right": "N", "left": "S"},
}

LinkKey = tuple
NodeKey = tuple


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkSpec:
    """Static description of a grid network.

    ``ns_classes`` assigns a road class to each vertical corridor (one per
    column, south to north); ``ew_classes`` does the same for horizontal
    corridors (one per row).  ``lanes_per_approach`` maps road class to
    lanes per travel direction and normally comes from
    :data:`LANES_PER_DIRECTION`.
    """

    rows: int
    cols: int
    ns_classes: tuple[str, ...]
    ew_classes: tuple[str, ...]
    lane_length_m: float = 100.0
    speed_limit_mps: float = 10.0
    lanes_per_approach: Mapping[str, int] = field(
        default_factory=lambda: dict(LANES_PER_DIRECTION)
    )

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise NetworkError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if self.cols > 26:
            raise NetworkError("column names use single letters; at most 26 columns")
        if len(self.ns_classes) != self.cols:
            raise NetworkError(
                f"ns_classes needs one entry per column ({self.cols}), got {len(self.ns_classes)}"
            )
        if len(self.ew_classes) != self.rows:
            raise NetworkError(
                f"ew_classes needs one entry per row ({self.rows}), got {len(self.ew_classes)}"
            )
        for cls in tuple(self.ns_classes) + tuple(self.ew_classes):
            if cls not in self.lanes_per_approach:
                raise NetworkError(f"unknown road class {cls!r}")
            if int(self.lanes_per_approach[cls]) < 1:
                raise NetworkError(f"road class {cls!r} must have at least one lane")
        if self.lane_length_m <= 0:
            raise NetworkError("lane_length_m must be positive")
        if self.speed_limit_mps <= 0:
            raise NetworkError("speed_limit_mps must be positive")


@dataclass(frozen=True)
class Link:
    """One directed road segment (all lanes of one travel direction)."""

    key: LinkKey
    direction: str
    road_class: str
    n_lanes: int
    length_m: float
    speed_limit_mps: float
    from_node: NodeKey
    to_node: NodeKey

    @property
    def enters_intersection(self) -> bool:
        return self.to_node[0] == "i"

    @property
    def from_portal(self) -> bool:
        return self.from_node[0] == "p"


@dataclass
class Intersection:
    name: str
    col: int
    row: int
    # keyed by the travel direction of the incoming / outgoing link
    approaches: dict[str, Link] = field(default_factory=dict)
    outgoing: dict[str, Link] = field(default_factory=dict)

    @property
    def node(self) -> NodeKey:
        return ("i", self.col, self.row)

    def approach_lane_count(self) -> int:
        return sum(link.n_lanes for link in self.approaches.values())


@dataclass
class Network:
    spec: NetworkSpec
    links: dict[LinkKey, Link]
    intersections: dict[str, Intersection]

    @property
    def names(self) -> list[str]:
        """Intersection names in canonical (sorted) order."""
        return sorted(self.intersections)

    @property
    def entry_links(self) -> list[Link]:
        return [l for l in self.links.values() if l.from_portal]

    @property
    def exit_links(self) -> list[Link]:
        return [l for l in self.links.values() if not l.enters_intersection]

    def entry_key_of(self, link: Link) -> str:
        """Boundary entry name, e.g. ``"S:1"`` for the south portal of column 1."""
        if not link.from_portal:
            raise NetworkError(f"link {link.key} does not start at a portal")
        _, side, index = link.from_node
        return f"{side}:{index}"

    def movement_target(self, link: Link, turn: str) -> Link:
        """Outgoing link reached from ``link`` by ``turn`` at its end node."""
        if not link.enters_intersection:
            raise NetworkError(f"link {link.key} ends at a portal; no movements")
        node = link.to_node
        name = intersection_name(node[1], node[2])
        out_dir = TURN_TABLE[link.direction][turn]
        return self.intersections[name].outgoing[out_dir]


def intersection_name(col: int, row: int) -> str:
    return chr(ord("A") + col) + str(row)


def _node(col: int, row: int, rows: int, cols: int, orient: str, corridor: int) -> NodeKey:
    """Grid node or portal for one end of a corridor slot."""
    if orient == "v":
        if row < 0:
            return ("p", "S", corridor)
        if row >= rows:
            return ("p", "N", corridor)
        return ("i", col, row)
    if col < 0:
        return ("p", "W", corridor)
    if col >= cols:
        return ("p", "E", corridor)
    return ("i", col, row)


def build_network(spec: NetworkSpec) -> Network:
    """Materialise all links and intersections for ``spec``."""

    links: dict[LinkKey, Link] = {}

    def add(key: LinkKey, direction: str, road_class: str, from_node: NodeKey, to_node: NodeKey) -> None:
        links[key] = Link(
            key=key,
            direction=direction,
            road_class=road_class,
            n_lanes=int(spec.lanes_per_approach[road_class]),
            length_m=spec.lane_length_m,
            speed_limit_mps=spec.speed_limit_mps,
            from_node=from_node,
            to_node=to_node,
        )

    for col in range(spec.cols):
        cls = spec.ns_classes[col]
        for slot in range(spec.rows + 1):
            south = _node(col, slot - 1, spec.rows, spec.cols, "v", col)
            north = _node(col, slot, spec.rows, spec.cols, "v", col)
            add(("v", col, slot, "N"), "N", cls, south, north)
            add(("v", col, slot, "S"), "S", cls, north, south)

    for row in range(spec.rows):
        cls = spec.ew_classes[row]
        for slot in range(spec.cols + 1):
            west = _node(slot - 1, row, spec.rows, spec.cols, "h", row)
            east = _node(slot, row, spec.rows, spec.cols, "h", row)
            add(("h", row, slot, "E"), "E", cls, west, east)
            add(("h", row, slot, "W"), "W", cls, east, west)

    intersections: dict[str, Intersection] = {}
    for col in range(spec.cols):
        for row in range(spec.rows):
            intersections[intersection_name(col, row)] = Intersection(
                name=intersection_name(col, row), col=col, row=row
            )

    for link in links.values():
        if link.to_node[0] == "i":
            name = intersection_name(link.to_node[1], link.to_node[2])
            intersections[name].approaches[link.direction] = link
        if link.from_node[0] == "i":
            name = intersection_name(link.from_node[1], link.from_node[2])
            intersections[name].outgoing[link.direction] = link

    for inter in intersections.values():
        # every grid intersection is four-way by construction
        if sorted(inter.approaches) != sorted(DIRECTIONS) or sorted(inter.outgoing) != sorted(DIRECTIONS):
            raise NetworkError(f"intersection {inter.name} is not four-way")

    return Network(spec=spec, links=dict(sorted(links.items())), intersections=dict(sorted(intersections.items())))
