import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import networkx as nx
import numpy as np

from .engine import Simulator, seconds


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Position:
    """Point in the arena, in meters."""

    x: float
    y: float


@dataclass(frozen=True)
class MobilityParams:
    """Random waypoint parameters.

    Attributes:
        enabled (bool): When False nodes never leave their initial position.
        v_min (float): Minimum leg speed in m/s.
        v_max (float): Maximum leg speed in m/s.
        pause_s (float): Pause at each waypoint in seconds.
    """

    enabled: bool = True
    v_min: float = 1.0
    v_max: float = 20.0
    pause_s: float = 0.0

    def validate(self) -> None:
        if self.v_min <= 0 or self.v_max < self.v_min:
            raise ValueError("mobility speeds must satisfy 0 < v_min <= v_max")
        if self.pause_s < 0:
            raise ValueError("pause_s must be non-negative")


@dataclass
class WaypointState:
    """One random-waypoint leg of a node."""

    node: int
    origin: Position
    waypoint: Position
    speed: float
    depart_at: int
    arrive_at: int
    pause_until: int


class World:
    """Node placement, random-waypoint mobility and unit-disk range queries.

    Every node draws from its own ``("mobility", node)`` stream, so the
    trajectories depend only on the run seed and the node count, never on the
    routing protocol being simulated.

    Args:
        sim (Simulator): Engine used to schedule waypoint arrivals.
        node_count (int): Number of nodes.
        width (float): Arena width in meters.
        height (float): Arena height in meters.
        radius (float): Communication radius in meters (inclusive).
        mobility (MobilityParams): Random waypoint parameters.
        placement (Sequence[tuple], optional): Initial positions; drawn uniformly when omitted.
    """

    def __init__(
        self,
        sim: Simulator,
        node_count: int,
        width: float = 2500.0,
        height: float = 1500.0,
        radius: float = 250.0,
        mobility: MobilityParams = MobilityParams(),
        placement: Optional[Sequence[tuple]] = None,
    ):
        if node_count < 1:
            raise ValueError("node_count must be positive")
        mobility.validate()
        self.sim = sim
        self.node_count = node_count
        self.width = width
        self.height = height
        self.radius = radius
        self.mobility = mobility
        self._pause_us = seconds(mobility.pause_s)

        self._origin = np.zeros((node_count, 2))
        self._waypoint = np.zeros((node_count, 2))
        self._speed = np.zeros(node_count)
        self._depart = np.zeros(node_count, dtype=np.int64)
        self._legs: list = [None] * node_count
        self._cache_time = -1
        self._cache_positions = None

        if placement is not None and len(placement) != node_count:
            raise ValueError("placement must list one position per node")
        for node in range(node_count):
            if placement is not None:
                x, y = placement[node]
                if not (0.0 <= x <= width and 0.0 <= y <= height):
                    raise ValueError(f"node {node} placed outside the arena")
            else:
                stream = sim.rng("mobility", node)
                x, y = stream.uniform() * width, stream.uniform() * height
            here = Position(float(x), float(y))
            self._set_leg(WaypointState(node, here, here, 1.0, sim.now(), sim.now(), sim.now()))

    def start(self) -> None:
        """Start the first leg of every node (no-op when mobility is disabled)."""
        if not self.mobility.enabled:
            return
        for node in range(self.node_count):
            self.advance_waypoint(node)

    def _check(self, node: int) -> None:
        if not 0 <= node < self.node_count:
            raise ValueError(f"unknown node {node}")

    def _set_leg(self, leg: WaypointState) -> None:
        node = leg.node
        self._legs[node] = leg
        self._origin[node] = (leg.origin.x, leg.origin.y)
        self._waypoint[node] = (leg.waypoint.x, leg.waypoint.y)
        self._speed[node] = leg.speed
        self._depart[node] = leg.depart_at
        self._cache_time = -1

    def leg(self, node: int) -> WaypointState:
        """Current waypoint state of ``node``."""
        self._check(node)
        return self._legs[node]

    def position_at(self, node: int, t: int) -> Position:
        """Position of ``node`` at time ``t`` on its current leg.

        Moves linearly from origin toward waypoint at the leg speed and stays at
        the waypoint once reached.

        Raises:
            ValueError: If ``node`` is unknown.
        """
        self._check(node)
        leg = self._legs[node]
        dx = leg.waypoint.x - leg.origin.x
        dy = leg.waypoint.y - leg.origin.y
        distance = math.hypot(dx, dy)
        if distance == 0.0 or t <= leg.depart_at:
            return leg.origin if t <= leg.depart_at else leg.waypoint
        travelled = leg.speed * (t - leg.depart_at) / 1e6
        fraction = min(1.0, travelled / distance)
        return Position(leg.origin.x + fraction * dx, leg.origin.y + fraction * dy)

    def positions_at(self, t: int) -> np.ndarray:
        """Positions of all nodes at time ``t`` as an ``(n, 2)`` array."""
        if t == self._cache_time:
            return self._cache_positions
        delta = self._waypoint - self._origin
        distance = np.hypot(delta[:, 0], delta[:, 1])
        travelled = self._speed * np.maximum(t - self._depart, 0) / 1e6
        with np.errstate(divide="ignore", invalid="ignore"):
            fraction = np.where(distance > 0.0, np.minimum(1.0, travelled / distance), 1.0)
        fraction = np.where(t <= self._depart, 0.0, fraction)
        positions = self._origin + fraction[:, None] * delta
        self._cache_time = t
        self._cache_positions = positions
        return positions

    def in_range(self, a: int, b: int, t: int) -> bool:
        """True iff ``a`` and ``b`` are within the radius (boundary inclusive).

        Raises:
            ValueError: If ``a == b`` or either node is unknown.
        """
        if a == b:
            raise ValueError("in_range needs two distinct nodes")
        pa, pb = self.position_at(a, t), self.position_at(b, t)
        return math.hypot(pa.x - pb.x, pa.y - pb.y) <= self.radius

    def neighbors_of(self, node: int, t: int) -> set:
        """All nodes other than ``node`` within the radius at time ``t``."""
        self._check(node)
        positions = self.positions_at(t)
        delta = positions - positions[node]
        close = np.hypot(delta[:, 0], delta[:, 1]) <= self.radius
        close[node] = False
        return set(int(i) for i in np.flatnonzero(close))

    def topology(self, t: int) -> nx.Graph:
        """Unit-disk connectivity graph at time ``t``."""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.node_count))
        for node in range(self.node_count):
            graph.add_edges_from((node, other) for other in self.neighbors_of(node, t) if other > node)
        return graph

    def advance_waypoint(self, node: int) -> WaypointState:
        """Begin a new leg from the node's current waypoint.

        Samples the next waypoint uniformly in the arena and a speed uniformly in
        ``[v_min, v_max]`` from the node's mobility stream, then schedules the
        next advance at arrival plus pause.
        """
        self._check(node)
        now = self.sim.now()
        previous = self._legs[node]
        stream = self.sim.rng("mobility", node)
        waypoint = Position(stream.uniform() * self.width, stream.uniform() * self.height)
        speed = stream.uniform_range(self.mobility.v_min, self.mobility.v_max)
        distance = math.hypot(waypoint.x - previous.waypoint.x, waypoint.y - previous.waypoint.y)
        arrive_at = now + max(1, math.ceil(distance / speed * 1e6))
        leg = WaypointState(node, previous.waypoint, waypoint, speed, now, arrive_at,
                            arrive_at + self._pause_us)
        self._set_leg(leg)
        self.sim.schedule(self.advance_waypoint, node, leg.pause_until, "mobility-update", node)
        return leg
