"""Random Waypoint mobility traces: generation, queries and the trace file format."""

import math
from bisect import bisect_right
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.core.logging import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True, slots=True)
class Point:
    """Position in meters."""

    x: float
    y: float

    def distance_to(self, other: "Point") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True, slots=True)
class Leg:
    """One straight-line movement at constant speed."""

    start: Point
    target: Point
    speed: float
    start_time: float

    @property
    def length(self) -> float:
        return self.start.distance_to(self.target)

    @property
    def duration(self) -> float:
        if self.speed <= 0.0:
            return math.inf
        return self.length / self.speed

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration

    @property
    def velocity(self) -> tuple[float, float]:
        """Velocity vector (m/s); zero for a stationary or zero-length leg."""
        length = self.length
        if self.speed <= 0.0 or length == 0.0:
            return (0.0, 0.0)
        return (
            self.speed * (self.target.x - self.start.x) / length,
            self.speed * (self.target.y - self.start.y) / length,
        )


@dataclass(slots=True)
class MobilityTrace:
    """Per-node piecewise-linear waypoint trajectories over [0, horizon]."""

    legs: list[list[Leg]]
    horizon: float
    vmax: float
    seed: int
    area: tuple[float, float] = (100.0, 100.0)
    _starts: list[list[float]] = field(init=False, repr=False, default_factory=list)

    def __post_init__(self) -> None:
        self._starts = [[leg.start_time for leg in node_legs] for node_legs in self.legs]

    @property
    def num_nodes(self) -> int:
        return len(self.legs)

    def active_leg(self, node: int, t: float) -> Leg:
        """Leg in effect at time t (the later leg at an exact waypoint)."""
        if not 0.0 <= t <= self.horizon:
            raise ValueError(f"Time {t} outside trace horizon [0, {self.horizon}]")
        index = bisect_right(self._starts[node], t) - 1
        return self.legs[node][max(index, 0)]

    def positions_at(self, t: float) -> np.ndarray:
        """All node positions at time t as an (n, 2) array."""
        return np.array(
            [(p.x, p.y) for p in (position_at(self, node, t) for node in range(self.num_nodes))]
        )

    def velocities_at(self, t: float) -> np.ndarray:
        """All node velocity vectors at time t as an (n, 2) array."""
        return np.array([self.active_leg(node, t).velocity for node in range(self.num_nodes)])


def generate_trace(
    seed: int,
    num_nodes: int,
    area: tuple[float, float],
    vmax: float,
    horizon: float,
    anchors: Mapping[int, Point] | None = None,
) -> MobilityTrace:
    """
    Generate Random Waypoint trajectories for every node.

    Initial positions and every waypoint are uniform over the area; leg speeds are
    uniform over (0, vmax]. With vmax = 0 every node stays at its initial position.
    No pause time is inserted between legs.

    Args:
        seed: Seed for the trace's own random stream
        num_nodes: Number of nodes
        area: (width, height) in meters
        vmax: Maximum speed (m/s)
        horizon: Simulation horizon (s)
        anchors: Nodes pinned to a fixed point for the whole horizon (the sink)

    Returns:
        MobilityTrace covering [0, horizon] for every node
    """
    width, height = area
    if width <= 0 or height <= 0:
        raise ValueError(f"Area dimensions must be positive, got {width}x{height}")
    if num_nodes < 1:
        raise ValueError(f"num_nodes must be at least 1, got {num_nodes}")
    if vmax < 0:
        raise ValueError(f"vmax must be non-negative, got {vmax}")
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")

    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6D6F62]))
    starts = rng.uniform((0.0, 0.0), (width, height), size=(num_nodes, 2))

    legs: list[list[Leg]] = []
    for node in range(num_nodes):
        position = Point(float(starts[node, 0]), float(starts[node, 1]))
        if anchors and node in anchors:
            legs.append([Leg(anchors[node], anchors[node], 0.0, 0.0)])
            continue
        if vmax == 0:
            legs.append([Leg(position, position, 0.0, 0.0)])
            continue

        node_legs: list[Leg] = []
        t = 0.0
        while t <= horizon:
            target = Point(float(rng.uniform(0.0, width)), float(rng.uniform(0.0, height)))
            # 1 - U[0, 1) lies in (0, 1]
            speed = vmax * (1.0 - float(rng.random()))
            leg = Leg(position, target, speed, t)
            node_legs.append(leg)
            t = leg.end_time
            position = target
        legs.append(node_legs)

    logger.debug("Mobility trace generated", seed=seed, num_nodes=num_nodes, vmax=vmax)
    return MobilityTrace(legs=legs, horizon=horizon, vmax=vmax, seed=seed, area=(width, height))


def position_at(trace: MobilityTrace, node: int, t: float) -> Point:
    """
    Position of a node at time t by linear interpolation along its active leg.

    Args:
        trace: Mobility trace
        node: Node id
        t: Time in [0, horizon]

    Returns:
        Point inside the area rectangle
    """
    leg = trace.active_leg(node, t)
    vx, vy = leg.velocity
    elapsed = t - leg.start_time
    width, height = trace.area
    # clamp absorbs rounding at the far end of a leg
    x = min(max(leg.start.x + elapsed * vx, 0.0), width)
    y = min(max(leg.start.y + elapsed * vy, 0.0), height)
    return Point(x, y)


def write_trace(trace: MobilityTrace, path: Path) -> None:
    """
    Write a trace file: header `num_nodes horizon vmax seed`, then one leg per line
    `node_id start_time x0 y0 x1 y1 speed`. Floats use repr so reading is exact.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{trace.num_nodes} {trace.horizon!r} {trace.vmax!r} {trace.seed}"]
    for node, node_legs in enumerate(trace.legs):
        for leg in node_legs:
            lines.append(
                f"{node} {leg.start_time!r} {leg.start.x!r} {leg.start.y!r} "
                f"{leg.target.x!r} {leg.target.y!r} {leg.speed!r}"
            )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.debug("Trace written", path=str(path), legs=len(lines) - 1)


def read_trace(path: Path, area: tuple[float, float] = (100.0, 100.0)) -> MobilityTrace:
    """Read a trace file written by write_trace."""
    with open(path, encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 4:
            raise ValueError(f"Malformed trace header in {path}: {header}")
        num_nodes, horizon, vmax, seed = int(header[0]), float(header[1]), float(header[2]), int(header[3])
        legs: list[list[Leg]] = [[] for _ in range(num_nodes)]
        for line_no, line in enumerate(f, start=2):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 7:
                raise ValueError(f"Malformed trace line {line_no} in {path}")
            node = int(fields[0])
            if not 0 <= node < num_nodes:
                raise ValueError(
                    f"Trace line {line_no} in {path}: node id {node} out of range for {num_nodes} nodes"
                )
            t0, x0, y0, x1, y1, speed = (float(v) for v in fields[1:])
            legs[node].append(Leg(Point(x0, y0), Point(x1, y1), speed, t0))
    return MobilityTrace(legs=legs, horizon=horizon, vmax=vmax, seed=seed, area=area)
