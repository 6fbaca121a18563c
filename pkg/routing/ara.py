import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from sim.engine import seconds
from sim.net import Network
from sim.packet import BROADCAST, Packet, PacketKind

from .base_protocol import ExpiringTable, ProtocolParams, RoutingProtocol


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AraParams(ProtocolParams):
    """ARA constants.

    Attributes:
        initial_pheromone (float): Pheromone of a one-hop ant; ``k`` hops store ``initial_pheromone / k``.
        reinforcement (float): Added to an entry each time a data packet is sent through it.
        decay (float): Multiplier applied at every evaporation tick.
        evaporation_interval_s (float): Seconds between evaporation ticks.
        pheromone_floor (float): Evaporation never takes an active entry below this value.
        stale_after_s (float): Seconds an entry may sit at the floor before it is deactivated.
        registry_lifetime_s (float): Seconds an ant or data id is remembered for duplicate detection.
    """

    initial_pheromone: float = 1.0
    reinforcement: float = 0.1
    decay: float = 0.98
    evaporation_interval_s: float = 1.0
    pheromone_floor: float = 1e-3
    stale_after_s: float = 10.0
    registry_lifetime_s: float = 30.0

    def validate(self) -> None:
        super().validate()
        if self.initial_pheromone <= 0:
            raise ValueError("initial_pheromone must be positive")
        if self.reinforcement < 0:
            raise ValueError("reinforcement must be non-negative")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must lie in (0, 1]")
        if self.evaporation_interval_s <= 0:
            raise ValueError("evaporation_interval_s must be positive")
        if not 0.0 < self.pheromone_floor < self.initial_pheromone:
            raise ValueError("pheromone_floor must lie between 0 and initial_pheromone")
        if self.stale_after_s < 0:
            raise ValueError("stale_after_s must be non-negative")
        if self.registry_lifetime_s <= 0:
            raise ValueError("registry_lifetime_s must be positive")


@dataclass
class AraEntry:
    """Pheromone of one (destination, next hop) pair; 0 means deactivated."""

    phi: float
    floor_since: Optional[int] = None

    @property
    def active(self) -> bool:
        return self.phi > 0.0


class AraRouteTable:
    """Route table of one ARA node, keyed by destination then next hop."""

    def __init__(self):
        self._rows: dict = {}

    def entry(self, destination: int, next_hop: int) -> Optional[AraEntry]:
        return self._rows.get(destination, {}).get(next_hop)

    def pheromone(self, destination: int, next_hop: int) -> float:
        entry = self.entry(destination, next_hop)
        return entry.phi if entry is not None else 0.0

    def active(self, destination: int) -> dict:
        """Active entries for ``destination`` as ``{next_hop: phi}``."""
        return {n: e.phi for n, e in self._rows.get(destination, {}).items() if e.active}

    def set(self, destination: int, next_hop: int, phi: float) -> AraEntry:
        entry = self._rows.setdefault(destination, {}).setdefault(next_hop, AraEntry(0.0))
        entry.phi = phi
        entry.floor_since = None
        return entry

    def deactivate(self, destination: int, next_hop: int) -> bool:
        entry = self.entry(destination, next_hop)
        if entry is None or not entry.active:
            return False
        entry.phi = 0.0
        entry.floor_since = None
        return True

    def deactivate_next_hop(self, next_hop: int) -> list:
        """Zero every entry through ``next_hop``; returns the destinations affected."""
        return [d for d in sorted(self._rows) if self.deactivate(d, next_hop)]

    def items(self):
        for destination, row in self._rows.items():
            for next_hop, entry in row.items():
                yield destination, next_hop, entry


class Ara(RoutingProtocol):
    """Ant-Colony-Based Routing Algorithm agent.

    A forward ant flooded from the source leaves reverse pheromone toward the
    source at every node it reaches first; the destination answers with a
    backward ant that leaves forward pheromone toward itself on the way back.
    Data packets follow the pheromone probabilistically and reinforce the
    entries they use, while a periodic tick lets unused entries evaporate. A
    node never forwards the same data packet twice.
    """

    name = "ara"

    def __init__(self, node: int, net: Network, params: AraParams = AraParams()):
        super().__init__(node, net, params)
        self.table = AraRouteTable()
        self.registry = ExpiringTable(seconds(params.registry_lifetime_s))
        self.duplicate_errors = 0
        self._ant_sequence = 0
        self._stale_after = seconds(params.stale_after_s)

    def start(self) -> None:
        self.sim.schedule_in(seconds(self.params.evaporation_interval_s), self.evaporate,
                             self.node, "timer-expiry")

    def _usable(self, destination: int) -> dict:
        active = self.table.active(destination)
        if not active:
            return {}
        in_range = self.net.neighbors(self.node)
        return {n: phi for n, phi in active.items() if n in in_range}

    def has_route(self, destination: int) -> bool:
        return bool(self._usable(destination))

    def next_hop_probabilities(self, destination: int) -> dict:
        """Selection probability of each usable next hop, ``phi / sum(phi)``."""
        usable = self._usable(destination)
        total = sum(usable.values())
        return {n: usable[n] / total for n in sorted(usable)}

    def select_next_hop(self, destination: int) -> Optional[int]:
        usable = self._usable(destination)
        if not usable:
            return None
        neighbors = sorted(usable)
        return neighbors[self.rng.choice_weighted(np.array([usable[n] for n in neighbors]))]

    def send_discovery(self, destination: int) -> None:
        self._ant_sequence += 1
        self._register((PacketKind.ARA_FANT.value, self.node, self._ant_sequence))
        ant = self.new_packet(PacketKind.ARA_FANT, BROADCAST, destination, self.params.control_ttl,
                              {"sequence": self._ant_sequence})
        self.send(ant)

    def _first_time(self, key: tuple) -> bool:
        if key in self.registry:
            return False
        self._register(key)
        return True

    def _register(self, key: tuple) -> None:
        self.registry.put(key, True, self.sim.now())

    def _hop_pheromone(self, hops: int) -> float:
        return self.params.initial_pheromone / max(1, hops)

    def _deposit(self, destination: int, next_hop: int, hops: int) -> None:
        phi = self._hop_pheromone(hops)
        self.table.set(destination, next_hop, max(phi, self.table.pheromone(destination, next_hop)))

    def receive(self, packet: Packet, sender: int) -> None:
        kind = packet.kind
        if kind is PacketKind.ARA_FANT:
            self.handle_fant(packet, sender)
        elif kind is PacketKind.ARA_BANT:
            self.handle_bant(packet, sender)
        elif kind is PacketKind.ARA_RERR:
            self.handle_rerr(packet, sender)
        elif kind.is_end_to_end:
            self.handle_data(packet)

    def handle_fant(self, ant: Packet, sender: int) -> None:
        """Lay reverse pheromone toward the ant's source; answer or rebroadcast once."""
        if not self._first_time((PacketKind.ARA_FANT.value, ant.origin, ant.body["sequence"])):
            return
        self._deposit(ant.origin, sender, ant.hops)
        if ant.final_dst == self.node:
            self._ant_sequence += 1
            self._register((PacketKind.ARA_BANT.value, self.node, self._ant_sequence))
            backward = self.new_packet(PacketKind.ARA_BANT, sender, ant.origin, self.params.control_ttl,
                                       {"sequence": self._ant_sequence})
            self.send(backward)
            if self.send_buffer.count(ant.origin):
                self.route_found(ant.origin)
            return
        if ant.ttl <= 0:
            return
        ant.ttl -= 1
        ant.dst = BROADCAST
        self.send(ant)

    def handle_bant(self, ant: Packet, sender: int) -> None:
        """Lay forward pheromone toward the ant's origin and step back toward the requester."""
        if not self._first_time((PacketKind.ARA_BANT.value, ant.origin, ant.body["sequence"])):
            return
        self._deposit(ant.origin, sender, ant.hops)
        if ant.final_dst == self.node:
            self.route_found(ant.origin)
            return
        reverse = self._usable(ant.final_dst)
        if not reverse or ant.ttl <= 0:
            self.drop(ant, "no-route")
            return
        ant.ttl -= 1
        ant.dst = max(sorted(reverse), key=reverse.get)
        self.send(ant)

    def originate(self, packet: Packet) -> None:
        if self.has_route(packet.final_dst):
            self._forward_data(packet)
        else:
            self.buffer(packet)

    def _data_key(self, packet: Packet) -> tuple:
        return (packet.kind.value, packet.gen_id, packet.attempt)

    def handle_data(self, packet: Packet) -> None:
        if packet.final_dst == self.node:
            self.deliver(packet)
            return
        if not self._first_time(self._data_key(packet)):
            self.duplicate_errors += 1
            self.drop(packet, "duplicate-error")
            return
        if packet.ttl <= 0:
            self.drop(packet, "ttl")
            return
        packet.ttl -= 1
        if self.has_route(packet.final_dst):
            self._forward_data(packet)
        else:
            self._report_error(packet)
            self.drop(packet, "no-route")

    def _forward_data(self, packet: Packet) -> None:
        self._register(self._data_key(packet))
        next_hop = self.select_next_hop(packet.final_dst)
        entry = self.table.entry(packet.final_dst, next_hop)
        entry.phi += self.params.reinforcement
        entry.floor_since = None
        packet.dst = next_hop
        self.send(packet)

    def _report_error(self, packet: Packet) -> None:
        if len(packet.path_trace) < 2 or packet.path_trace[-1] != self.node:
            return
        previous = packet.path_trace[-2]
        error = self.new_packet(PacketKind.ARA_RERR, previous, previous, 1,
                                {"destination": packet.final_dst})
        self.send(error)

    def handle_rerr(self, error: Packet, sender: int) -> None:
        """Deactivate the entry toward the reported destination through ``sender``."""
        if self.table.deactivate(error.body["destination"], sender):
            logger.debug(f"Node {self.node} deactivated route to {error.body['destination']} via {sender}")

    def evaporate(self) -> None:
        """Decay every active entry toward the floor and deactivate the stale ones."""
        now = self.sim.now()
        floor = self.params.pheromone_floor
        for _, _, entry in self.table.items():
            if not entry.active:
                continue
            entry.phi = max(floor, self.params.decay * entry.phi)
            if entry.phi > floor:
                entry.floor_since = None
            elif entry.floor_since is None:
                entry.floor_since = now
            elif now - entry.floor_since > self._stale_after:
                entry.phi = 0.0
                entry.floor_since = None
        self.sim.schedule_in(seconds(self.params.evaporation_interval_s), self.evaporate,
                             self.node, "timer-expiry")

    def on_link_break(self, packet: Packet, next_hop: int) -> None:
        self.handle_failure(next_hop, packet)

    def handle_failure(self, lost_neighbor: int, packet: Packet) -> None:
        """Zero the pheromone through ``lost_neighbor`` and salvage, rediscover or report."""
        self.table.deactivate_next_hop(lost_neighbor)
        if not packet.kind.is_end_to_end:
            self.drop(packet, "link-break")
        elif self.has_route(packet.final_dst):
            self._forward_data(packet)
        elif packet.origin == self.node:
            self.buffer(packet)
        else:
            self._report_error(packet)
            self.drop(packet, "link-break")
