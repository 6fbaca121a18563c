import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np

from sim.engine import Event, seconds
from sim.net import Network
from sim.packet import BROADCAST, Packet, PacketKind

from .base_protocol import ExpiringTable, ProtocolParams, RoutingProtocol


logger = logging.getLogger(__name__)

FORWARD_ANTS = (PacketKind.AHN_FANT_REACTIVE, PacketKind.AHN_FANT_PROACTIVE)


class NoRouteError(LookupError):
    """No pheromone entry for the destination points at a neighbor in range."""


@dataclass(frozen=True)
class AntHocNetParams(ProtocolParams):
    """AntHocNet constants.

    Attributes:
        acceptance_factor (float): Ants farther than this factor from the generation's best are dropped.
        beta_ant (float): Exponent of the ants' next-hop distribution.
        beta_data (float): Exponent of the data next-hop distribution.
        gamma (float): Weight of the previous pheromone in the running average.
        hop_time_s (float): Per-hop time constant blended into the path cost.
        proactive_interval_s (float): Seconds between proactive ants of a session.
        broadcast_probability (float): Chance a proactive ant is broadcast at a node with pheromone.
        proactive_max_broadcast_hops (int): Broadcast hops a proactive ant may take without pheromone.
        generation_lifetime_s (float): Seconds the best ant of a generation is remembered at a node.
    """

    acceptance_factor: float = 1.5
    beta_ant: float = 1.0
    beta_data: float = 2.0
    gamma: float = 0.7
    hop_time_s: float = 0.003
    proactive_interval_s: float = 0.5
    broadcast_probability: float = 0.1
    proactive_max_broadcast_hops: int = 2
    generation_lifetime_s: float = 10.0

    def validate(self) -> None:
        super().validate()
        if self.acceptance_factor < 1.0:
            raise ValueError("acceptance_factor must be at least 1")
        if self.beta_ant <= 0 or self.beta_data <= 0:
            raise ValueError("beta_ant and beta_data must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.hop_time_s <= 0:
            raise ValueError("hop_time_s must be positive")
        if self.proactive_interval_s <= 0:
            raise ValueError("proactive_interval_s must be positive")
        if not 0.0 <= self.broadcast_probability <= 1.0:
            raise ValueError("broadcast_probability must lie in [0, 1]")
        if self.proactive_max_broadcast_hops < 0:
            raise ValueError("proactive_max_broadcast_hops must be non-negative")
        if self.generation_lifetime_s <= 0:
            raise ValueError("generation_lifetime_s must be positive")


@dataclass
class AntState:
    """Path sampled by a forward ant.

    Attributes:
        path (list): Visited nodes, source first, no repeats.
        hop_times (list): Microseconds spent on each hop (queueing plus airtime).
        generation (tuple): ``(source, destination, sequence)``.
    """

    path: list
    hop_times: list = field(default_factory=list)
    generation: tuple = ()

    @property
    def hops(self) -> int:
        return len(self.path) - 1

    @property
    def travel_us(self) -> int:
        return int(sum(self.hop_times))

    @property
    def travel_time(self) -> float:
        """Accumulated travel time in seconds."""
        return self.travel_us / 1e6


@dataclass
class GenerationBest:
    """Best hop count and travel time among the ants of one generation seen at a node."""

    best_hops: int
    best_us: int

    def update(self, ant: AntState) -> None:
        self.best_hops = min(self.best_hops, ant.hops)
        self.best_us = min(self.best_us, ant.travel_us)


def accept_ant(ant: AntState, best: Optional[GenerationBest], factor: float) -> bool:
    """Acceptance filter for forward ants.

    The first ant of a generation is always accepted; later ones only if both
    their hop count and their travel time are within ``factor`` times the best
    seen so far. The comparison is exact in integer microseconds, so an ant
    landing precisely on the bound is accepted.

    Raises:
        ValueError: If ``factor`` is below 1.
    """
    if factor < 1.0:
        raise ValueError("acceptance factor must be at least 1")
    if best is None:
        return True
    ratio = Fraction(factor).limit_denominator(1000)
    return (ant.hops * ratio.denominator <= best.best_hops * ratio.numerator
            and ant.travel_us * ratio.denominator <= best.best_us * ratio.numerator)


class PheromoneTable:
    """Goodness of each (neighbor, destination) pair; stored values are strictly positive."""

    def __init__(self):
        self._tau: dict = {}

    def get(self, neighbor: int, destination: int) -> Optional[float]:
        return self._tau.get(destination, {}).get(neighbor)

    def entries(self, destination: int) -> dict:
        return dict(self._tau.get(destination, {}))

    def destinations(self) -> list:
        return sorted(self._tau)

    def has(self, destination: int) -> bool:
        return bool(self._tau.get(destination))

    def update(self, neighbor: int, destination: int, goodness: float, gamma: float) -> float:
        """Blend ``goodness`` into the entry, creating it with ``goodness`` if absent."""
        if goodness <= 0:
            raise ValueError("pheromone goodness must be positive")
        row = self._tau.setdefault(destination, {})
        old = row.get(neighbor)
        row[neighbor] = goodness if old is None else gamma * old + (1.0 - gamma) * goodness
        return row[neighbor]

    def remove(self, neighbor: int, destination: int) -> bool:
        """Delete one entry; True iff it existed and was the last one for ``destination``."""
        row = self._tau.get(destination)
        if not row or neighbor not in row:
            return False
        del row[neighbor]
        if row:
            return False
        del self._tau[destination]
        return True

    def remove_neighbor(self, neighbor: int) -> set:
        """Delete every entry through ``neighbor``; returns destinations left without entries."""
        return {d for d in list(self._tau) if self.remove(neighbor, d)}


class AntHocNet(RoutingProtocol):
    """AntHocNet agent: reactive ant path setup, pheromone forwarding and proactive sampling.

    Reactive forward ants are broadcast from the source; each node rebroadcasts
    an ant only if it passes the acceptance filter against the best ant of the
    same generation seen there. The destination turns accepted ants into
    backward ants that retrace the path and deposit pheromone. DATA follows the
    pheromone stochastically. While a session is active the source keeps
    launching proactive ants along the pheromone.
    """

    name = "anthocnet"

    def __init__(self, node: int, net: Network, params: AntHocNetParams = AntHocNetParams()):
        super().__init__(node, net, params)
        self.pheromone = PheromoneTable()
        self.generation_best = ExpiringTable(seconds(params.generation_lifetime_s))
        self.proactive_generations = 0
        self.notifications_sent = 0
        self._generation = 0
        self._sessions: dict = {}
        self._proactive_timers: dict = {}

    def _usable(self, destination: int, exclude: Iterable[int] = ()) -> dict:
        entries = self.pheromone.entries(destination)
        if not entries:
            return {}
        in_range = self.net.neighbors(self.node)
        excluded = set(exclude)
        return {n: tau for n, tau in entries.items() if n in in_range and n not in excluded}

    def has_route(self, destination: int) -> bool:
        return bool(self._usable(destination))

    def next_hop_probabilities(self, destination: int, beta: float, exclude: Iterable[int] = ()) -> dict:
        """Probability of each usable neighbor under the ``tau ** beta`` rule."""
        usable = self._usable(destination, exclude)
        if not usable:
            return {}
        neighbors = sorted(usable)
        weights = np.array([usable[n] for n in neighbors]) ** beta
        return dict(zip(neighbors, weights / weights.sum()))

    def stochastic_next_hop(self, destination: int, beta: float, exclude: Iterable[int] = ()) -> int:
        """Sample a neighbor with probability proportional to ``tau ** beta``.

        Raises:
            NoRouteError: If no pheromone entry for ``destination`` is usable.
        """
        usable = self._usable(destination, exclude)
        if not usable:
            raise NoRouteError(f"node {self.node} has no usable pheromone toward {destination}")
        neighbors = sorted(usable)
        weights = np.array([usable[n] for n in neighbors]) ** beta
        return neighbors[self.rng.choice_weighted(weights)]

    def _new_generation(self, destination: int) -> tuple:
        self._generation += 1
        return (self.node, destination, self._generation)

    def send_discovery(self, destination: int) -> None:
        self.reactive_setup(destination)

    def reactive_setup(self, destination: int) -> Packet:
        """Broadcast a reactive forward ant of a fresh generation toward ``destination``."""
        ant = self.new_packet(PacketKind.AHN_FANT_REACTIVE, BROADCAST, destination, self.params.control_ttl,
                              {"path": [self.node], "hop_times": [],
                               "generation": self._new_generation(destination)})
        self.send(ant)
        return ant

    def on_session_start(self, destination: int, stop: int) -> None:
        self._sessions[destination] = max(stop, self._sessions.get(destination, stop))
        timer = self._proactive_timers.get(destination)
        if timer is None or timer.fired or timer.cancelled:
            self._schedule_tick(destination)

    def _schedule_tick(self, destination: int) -> Optional[Event]:
        at = self.sim.now() + seconds(self.params.proactive_interval_s)
        if at > self._sessions.get(destination, -1):
            self._proactive_timers.pop(destination, None)
            self._sessions.pop(destination, None)
            return None
        timer = self.sim.schedule(self.proactive_tick, self.node, at, "timer-expiry", destination)
        self._proactive_timers[destination] = timer
        return timer

    def proactive_tick(self, destination: int) -> None:
        """Launch one proactive forward ant if a path exists, then rearm while the session lasts."""
        if self.has_route(destination):
            ant = self.new_packet(PacketKind.AHN_FANT_PROACTIVE, BROADCAST, destination,
                                  self.params.control_ttl,
                                  {"path": [self.node], "hop_times": [],
                                   "generation": self._new_generation(destination), "off_hops": 0})
            self.proactive_generations += 1
            self._forward_ant(ant)
        self._schedule_tick(destination)

    def originate(self, packet: Packet) -> None:
        if self.has_route(packet.final_dst):
            self._forward_data(packet)
        else:
            self.buffer(packet)

    def _forward_data(self, packet: Packet) -> None:
        packet.dst = self.stochastic_next_hop(packet.final_dst, self.params.beta_data)
        self.send(packet)

    def receive(self, packet: Packet, sender: int) -> None:
        kind = packet.kind
        if kind in FORWARD_ANTS:
            self.handle_fant(packet)
        elif kind is PacketKind.AHN_BANT:
            self.handle_bant(packet)
        elif kind is PacketKind.AHN_LINK_NOTIFY:
            self.handle_link_notify(packet, sender)
        elif kind.is_end_to_end:
            self._relay_data(packet)

    def _relay_data(self, packet: Packet) -> None:
        if packet.final_dst == self.node:
            self.deliver(packet)
            return
        if packet.ttl <= 0:
            self.drop(packet, "ttl")
            return
        packet.ttl -= 1
        if self.has_route(packet.final_dst):
            self._forward_data(packet)
        else:
            self.drop(packet, "no-route")

    def handle_fant(self, packet: Packet) -> None:
        """Filter a forward ant, extend its path and pass it on or answer it at the destination."""
        body = packet.body
        if self.node in body["path"]:
            return
        ant = AntState(body["path"] + [self.node], body["hop_times"] + [packet.last_hop_us],
                       tuple(body["generation"]))
        best = self.generation_best.get(ant.generation)
        if not accept_ant(ant, best, self.params.acceptance_factor):
            return
        if best is None:
            self.generation_best.put(ant.generation, GenerationBest(ant.hops, ant.travel_us), self.sim.now())
        else:
            best.update(ant)
        body["path"], body["hop_times"] = ant.path, ant.hop_times
        if packet.final_dst == self.node:
            self._send_bant(ant)
            return
        if packet.ttl <= 0:
            return
        packet.ttl -= 1
        self._forward_ant(packet)

    def _forward_ant(self, packet: Packet) -> None:
        destination = packet.final_dst
        usable = self._usable(destination, exclude=packet.body["path"])
        if packet.kind is PacketKind.AHN_FANT_PROACTIVE:
            if usable and not self.rng.bernoulli(self.params.broadcast_probability):
                packet.dst = self.stochastic_next_hop(destination, self.params.beta_ant, packet.body["path"])
            else:
                if not usable:
                    packet.body["off_hops"] += 1
                    if packet.body["off_hops"] > self.params.proactive_max_broadcast_hops:
                        return
                packet.dst = BROADCAST
        elif usable:
            packet.dst = self.stochastic_next_hop(destination, self.params.beta_ant, packet.body["path"])
        else:
            packet.dst = BROADCAST
        self.send(packet)

    def _send_bant(self, ant: AntState) -> None:
        bant = self.new_packet(PacketKind.AHN_BANT, ant.path[-2], ant.path[0], len(ant.path),
                               {"path": list(ant.path), "hop_times": list(ant.hop_times)})
        self.send(bant)

    def path_cost(self, remaining_time: float, remaining_hops: int) -> float:
        """Cost of reaching the destination: mean of the measured time and the hop-based estimate."""
        return (remaining_time + remaining_hops * self.params.hop_time_s) / 2.0

    def handle_bant(self, packet: Packet) -> None:
        """Deposit pheromone toward the ant's destination and step back along its path."""
        path, hop_times = packet.body["path"], packet.body["hop_times"]
        if self.node not in path or path.index(self.node) == len(path) - 1:
            self.protocol_errors += 1
            self.drop(packet, "protocol-error")
            return
        index = path.index(self.node)
        destination = path[-1]
        cost = self.path_cost(sum(hop_times[index:]) / 1e6, len(path) - 1 - index)
        self.pheromone.update(path[index + 1], destination, 1.0 / cost, self.params.gamma)
        if index == 0:
            self.route_found(destination)
            return
        packet.dst = path[index - 1]
        self.send(packet)

    def on_link_break(self, packet: Packet, next_hop: int) -> None:
        self.handle_link_failure(next_hop, packet)

    def handle_link_failure(self, lost_neighbor: int, packet: Optional[Packet] = None) -> None:
        """Forget ``lost_neighbor``, notify neighbors of lost destinations and reroute ``packet``."""
        lost = self.pheromone.remove_neighbor(lost_neighbor)
        if lost:
            self._notify(lost)
        if packet is None:
            return
        if not packet.kind.is_end_to_end:
            self.drop(packet, "link-break")
        elif self.has_route(packet.final_dst):
            self._forward_data(packet)
        elif packet.origin == self.node:
            self.buffer(packet)
        else:
            self.drop(packet, "no-route")

    def _notify(self, lost: set) -> None:
        self.notifications_sent += 1
        notice = self.new_packet(PacketKind.AHN_LINK_NOTIFY, BROADCAST, BROADCAST, 1,
                                 {"lost": sorted(lost)})
        self.send(notice)

    def handle_link_notify(self, packet: Packet, sender: int) -> None:
        """Drop entries through ``sender`` for the listed destinations; cascade on last-entry loss."""
        lost = {d for d in packet.body["lost"] if d != self.node and self.pheromone.remove(sender, d)}
        if lost:
            self._notify(lost)
