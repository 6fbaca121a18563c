import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

from sim.engine import Event, seconds
from sim.net import Network
from sim.packet import Packet, PacketKind

from .send_buffer import SendBuffer


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProtocolParams:
    """Constants shared by every routing protocol.

    Attributes:
        send_buffer_size (int): Packets that may wait for a route.
        send_buffer_timeout_s (float): Seconds a packet may wait for a route.
        discovery_timeout_s (float): Wait before the first discovery retry.
        max_discovery_attempts (int): Discovery attempts before buffered packets are dropped.
        control_ttl (int): Hop budget of flooded control packets.
    """

    send_buffer_size: int = 64
    send_buffer_timeout_s: float = 30.0
    discovery_timeout_s: float = 1.0
    max_discovery_attempts: int = 3
    control_ttl: int = 16

    def validate(self) -> None:
        """Check the constants before a run.

        Raises:
            ValueError: Naming the first field that is out of range.
        """
        if self.send_buffer_size < 1:
            raise ValueError("send_buffer_size must be at least 1")
        if self.send_buffer_timeout_s <= 0:
            raise ValueError("send_buffer_timeout_s must be positive")
        if self.discovery_timeout_s <= 0:
            raise ValueError("discovery_timeout_s must be positive")
        if self.max_discovery_attempts < 1:
            raise ValueError("max_discovery_attempts must be at least 1")
        if self.control_ttl < 1:
            raise ValueError("control_ttl must be at least 1")


@dataclass
class Discovery:
    attempts: int
    timer: Optional[Event]


class ExpiringTable:
    """Mapping whose entries are forgotten ``lifetime`` microseconds after they were stored.

    Entries are kept in storage order, so expiry only has to look at the oldest
    ones. Stored times must not decrease, which holds for the simulation clock.
    """

    def __init__(self, lifetime: int):
        self.lifetime = lifetime
        self._entries: dict = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key) -> bool:
        return key in self._entries

    def get(self, key, default=None):
        entry = self._entries.get(key)
        return default if entry is None else entry[1]

    def put(self, key, value, now: int) -> None:
        """Store ``value`` under ``key`` at time ``now``, expiring older entries first."""
        self.expire(now)
        self._entries.pop(key, None)
        self._entries[key] = (now, value)

    def expire(self, now: int) -> int:
        """Forget entries older than the lifetime; returns how many went."""
        removed = 0
        while self._entries:
            oldest = next(iter(self._entries))
            if now - self._entries[oldest][0] <= self.lifetime:
                break
            del self._entries[oldest]
            removed += 1
        return removed


class RoutingProtocol(ABC):
    """Abstract routing agent of one node.

    The network stack calls :meth:`receive` for every frame copy the node
    hears and :meth:`on_link_break` when a unicast could not reach its next
    hop. The application calls :meth:`originate` for DATA and ACK packets.
    Subclasses implement the protocol; this base class owns the send buffer and
    the discovery retry bookkeeping shared by all three protocols.

    Args:
        node (int): Node this agent runs on.
        net (Network): Network stack of the run.
        params (ProtocolParams): Protocol constants.
    """

    name = "base"

    def __init__(self, node: int, net: Network, params: ProtocolParams):
        params.validate()
        self.node = node
        self.net = net
        self.sim = net.sim
        self.params = params
        self.rng = self.sim.rng("routing", node)
        self.send_buffer = SendBuffer(params.send_buffer_size, seconds(params.send_buffer_timeout_s))
        self.protocol_errors = 0
        self._discoveries: dict = {}
        self._expiry_timer: Optional[Event] = None

    def start(self) -> None:
        """Start periodic timers; called once before the run."""

    def finish(self) -> None:
        """Drop everything still waiting for a route at the end of the run."""
        for packet in self.send_buffer.drain():
            self.drop(packet, "no-route")

    def on_session_start(self, destination: int, stop: int) -> None:
        """Hook called when this node starts a session toward ``destination``."""

    @abstractmethod
    def originate(self, packet: Packet) -> None:
        """Route a DATA or ACK packet created at this node."""

    @abstractmethod
    def receive(self, packet: Packet, sender: int) -> None:
        """Handle a frame copy heard from ``sender``."""

    @abstractmethod
    def on_link_break(self, packet: Packet, next_hop: int) -> None:
        """Handle a unicast of ``packet`` that could not reach ``next_hop``."""

    @abstractmethod
    def has_route(self, destination: int) -> bool:
        """True if a packet for ``destination`` can be sent right now."""

    @abstractmethod
    def send_discovery(self, destination: int) -> None:
        """Emit one discovery attempt toward ``destination``."""

    def discovery_delay(self, attempt: int) -> int:
        """Wait after discovery attempt number ``attempt`` (1-based), in microseconds."""
        return seconds(self.params.discovery_timeout_s)

    def new_packet(self, kind: PacketKind, dst: int, final_dst: int, ttl: int,
                   body: Optional[dict] = None) -> Packet:
        return Packet(kind, self.node, dst, self.node, final_dst,
                      (self.node, self.net.next_sequence(self.node)), ttl,
                      body=body or {}, created_at=self.sim.now())

    def send(self, packet: Packet) -> bool:
        return self.net.send(self.node, packet)

    def drop(self, packet: Packet, reason: str) -> None:
        self.net.drop(packet, reason)

    def deliver(self, packet: Packet) -> None:
        self.net.deliver_local(self.node, packet)

    def buffer(self, packet: Packet) -> None:
        """Hold ``packet`` until a route to its destination exists, discovering one if needed."""
        for lost in self.send_buffer.add(packet, self.sim.now()):
            self.drop(lost, "buffer-full")
        self._arm_expiry()
        self.start_discovery(packet.final_dst)

    def start_discovery(self, destination: int) -> bool:
        """Begin discovery toward ``destination`` unless one is already pending."""
        if destination in self._discoveries:
            return False
        logger.debug(f"Node {self.node} starts route discovery toward {destination}")
        discovery = self._discoveries[destination] = Discovery(1, None)
        self.send_discovery(destination)
        discovery.timer = self.sim.schedule_in(self.discovery_delay(1), self._discovery_timeout,
                                               self.node, "timer-expiry", destination)
        return True

    def _discovery_timeout(self, destination: int) -> None:
        discovery = self._discoveries.get(destination)
        if discovery is None:
            return
        if self.has_route(destination):
            self.route_found(destination)
            return
        if discovery.attempts >= self.params.max_discovery_attempts:
            del self._discoveries[destination]
            logger.debug(f"Node {self.node} gives up discovery toward {destination}")
            for packet in self.send_buffer.pop(destination):
                self.drop(packet, "no-route")
            return
        discovery.attempts += 1
        self.send_discovery(destination)
        discovery.timer = self.sim.schedule_in(self.discovery_delay(discovery.attempts),
                                               self._discovery_timeout, self.node,
                                               "timer-expiry", destination)

    def discovery_pending(self, destination: int) -> bool:
        return destination in self._discoveries

    def route_found(self, destination: int) -> None:
        """End any pending discovery and release the packets buffered for ``destination``."""
        discovery = self._discoveries.pop(destination, None)
        if discovery is not None:
            self.sim.cancel(discovery.timer)
        for packet in self.send_buffer.pop(destination):
            self.originate(packet)

    def _arm_expiry(self) -> None:
        expiry = self.send_buffer.next_expiry()
        if expiry is None:
            return
        timer = self._expiry_timer
        if timer is not None and not timer.fired and not timer.cancelled:
            if timer.fire_at <= expiry:
                return
            self.sim.cancel(timer)
        self._expiry_timer = self.sim.schedule(self._expire_buffer, self.node, expiry, "timer-expiry")

    def _expire_buffer(self) -> None:
        self._expiry_timer = None
        for packet in self.send_buffer.expire(self.sim.now()):
            self.drop(packet, "buffer-timeout")
        self._arm_expiry()
