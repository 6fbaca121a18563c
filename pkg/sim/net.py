import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .engine import Simulator
from .metrics import MetricsRecorder
from .packet import BROADCAST, NEIGHBOR_SCOPED, Packet, PacketKind
from .world import World


logger = logging.getLogger(__name__)

TX = "tx"
RX = "rx"


@dataclass(frozen=True)
class RadioParams:
    """Interface, channel and energy parameters shared by all nodes.

    Attributes:
        bandwidth_bps (int): Link rate in bits per second.
        queue_capacity (int): Interface queue length across both priority classes.
        p_err (float): Per-receiver frame loss probability.
        initial_energy (float): Battery at start, in joules.
        tx_cost_per_bit (float): Joules per transmitted bit.
        rx_cost_per_bit (float): Joules per received bit.
    """

    bandwidth_bps: int = 2_000_000
    queue_capacity: int = 50
    p_err: float = 0.0
    initial_energy: float = 100.0
    tx_cost_per_bit: float = 1e-6
    rx_cost_per_bit: float = 0.5e-6

    def validate(self) -> None:
        if self.bandwidth_bps <= 0:
            raise ValueError("bandwidth_bps must be positive")
        if self.queue_capacity < 1:
            raise ValueError("queue_capacity must be at least 1")
        if not 0.0 <= self.p_err <= 1.0:
            raise ValueError("p_err must lie in [0, 1]")
        if self.initial_energy <= 0 or self.tx_cost_per_bit < 0 or self.rx_cost_per_bit < 0:
            raise ValueError("energy parameters must be non-negative with positive initial energy")


@dataclass
class EnergyState:
    """Battery of one node; ``remaining`` never increases."""

    remaining: float = 100.0
    initial: float = 100.0
    tx_cost_per_bit: float = 1e-6
    rx_cost_per_bit: float = 0.5e-6

    @property
    def alive(self) -> bool:
        return self.remaining > 0.0


class InterfaceQueue:
    """Drop-tail queue with two FIFO classes; control is always served before data."""

    def __init__(self, capacity: int = 50):
        self.capacity = capacity
        self.control: deque = deque()
        self.data: deque = deque()

    def __len__(self) -> int:
        return len(self.control) + len(self.data)

    def push(self, packet: Packet) -> bool:
        if len(self) >= self.capacity:
            return False
        (self.control if packet.kind.is_control else self.data).append(packet)
        return True

    def pop(self) -> Optional[Packet]:
        if self.control:
            return self.control.popleft()
        if self.data:
            return self.data.popleft()
        return None

    def flush(self) -> list:
        packets = list(self.control) + list(self.data)
        self.control.clear()
        self.data.clear()
        return packets


class Network:
    """Per-node network stacks over a unit-disk radio.

    Each node owns an interface queue, a half-duplex transmitter and a battery.
    Frames take ``size_bits / bandwidth`` to send and are delivered when the
    airtime ends, to whoever is in range at that instant. A unicast whose
    receiver is gone raises a link-break indication at the sender's protocol.

    Args:
        sim (Simulator): Engine of the run.
        world (World): Positions and range queries.
        recorder (MetricsRecorder): Outcome observer.
        params (RadioParams): Interface, channel and energy parameters.
    """

    def __init__(self, sim: Simulator, world: World, recorder: MetricsRecorder,
                 params: RadioParams = RadioParams()):
        params.validate()
        self.sim = sim
        self.world = world
        self.recorder = recorder
        self.params = params
        n = world.node_count
        self.queues = [InterfaceQueue(params.queue_capacity) for _ in range(n)]
        self.energy = [EnergyState(params.initial_energy, params.initial_energy,
                                   params.tx_cost_per_bit, params.rx_cost_per_bit) for _ in range(n)]
        self.protocols: list = [None] * n
        self.on_local_delivery: Optional[Callable[[int, Packet], None]] = None
        self.energy_debited = 0.0
        self._busy = [False] * n
        self._sequence = [0] * n

    @property
    def node_count(self) -> int:
        return self.world.node_count

    def attach(self, protocols: Sequence) -> None:
        if len(protocols) != self.node_count:
            raise ValueError("one protocol instance per node is required")
        self.protocols = list(protocols)

    def airtime_us(self, bits: int) -> int:
        return -(-bits * 1_000_000 // self.params.bandwidth_bps)

    def next_sequence(self, node: int) -> int:
        """Fresh per-node sequence number for ``gen_id``s."""
        self._sequence[node] += 1
        return self._sequence[node]

    def alive(self, node: int) -> bool:
        return self.energy[node].alive

    def neighbors(self, node: int) -> set:
        """Alive nodes currently in range of ``node``."""
        return {n for n in self.world.neighbors_of(node, self.sim.now()) if self.energy[n].alive}

    def send(self, node: int, packet: Packet) -> bool:
        """Queue ``packet`` at ``node`` and start the transmitter if it is idle."""
        accepted = self.enqueue(node, packet)
        if accepted and not self._busy[node]:
            self.transmit_next(node)
        return accepted

    def enqueue(self, node: int, packet: Packet) -> bool:
        """Append ``packet`` to its priority class, dropping it when the queue is full."""
        if not self.energy[node].alive:
            self.drop(packet, "node-dead")
            return False
        packet.src = node
        packet.enqueued_at = self.sim.now()
        if not self.queues[node].push(packet):
            self.drop(packet, "queue-full")
            return False
        return True

    def transmit_next(self, node: int) -> int:
        """Put the head of the queue on the air.

        A frame whose transmission drains the battery is lost with the node.

        Returns:
            int: Airtime in microseconds, 0 when nothing was sent.
        """
        if self._busy[node] or not self.energy[node].alive:
            return 0
        packet = self.queues[node].pop()
        if packet is None:
            return 0
        airtime = self.airtime_us(packet.size_bits)
        self._busy[node] = True
        self.debit_energy(node, TX, packet.size_bits)
        if not self.energy[node].alive:
            self._busy[node] = False
            self.drop(packet, "node-dead")
            return 0
        self.sim.schedule_in(airtime, self._end_of_frame, node, "frame-delivery", node, packet)
        return airtime

    def _end_of_frame(self, sender: int, packet: Packet) -> None:
        self._busy[sender] = False
        self.deliver_frame(sender, packet)
        if not self._busy[sender]:
            self.transmit_next(sender)

    def deliver_frame(self, sender: int, packet: Packet) -> set:
        """Hand copies of a finished frame to the receivers in range.

        Returns:
            set: Nodes that received a copy.
        """
        now = self.sim.now()
        in_range = self.neighbors(sender)
        if packet.dst == BROADCAST:
            candidates = sorted(in_range)
        elif packet.dst in in_range:
            candidates = [packet.dst]
        else:
            self.protocols[sender].on_link_break(packet, packet.dst)
            return set()

        bits = packet.size_bits
        receivers = set()
        for receiver in candidates:
            self.debit_energy(receiver, RX, bits)
            if not self.energy[receiver].alive:
                continue
            if self.params.p_err > 0.0 and self.sim.rng("channel", receiver).bernoulli(self.params.p_err):
                if packet.dst != BROADCAST:
                    self.drop(packet, "channel-loss")
                continue
            copy = packet.copy()
            copy.hops += 1
            copy.path_trace.append(receiver)
            copy.last_hop_us = now - packet.enqueued_at
            receivers.add(receiver)
            if copy.kind is not PacketKind.DATA and (
                    copy.kind in NEIGHBOR_SCOPED or copy.final_dst == receiver):
                self.recorder.control_reached(copy, now)
            self.protocols[receiver].receive(copy, sender)
        return receivers

    def deliver_local(self, node: int, packet: Packet) -> None:
        """Pass a packet that reached its final destination up to the application."""
        if packet.kind is PacketKind.DATA:
            self.recorder.data_arrived(packet, self.sim.now())
        if self.on_local_delivery is not None:
            self.on_local_delivery(node, packet)

    def drop(self, packet: Packet, reason: str) -> None:
        self.recorder.drop(packet, reason)

    def debit_energy(self, node: int, direction: str, bits: int) -> float:
        """Charge ``bits`` of transmission or reception to ``node``'s battery.

        The battery is clamped at zero; the crossing marks the node dead and its
        queued packets are dropped.

        Returns:
            float: Remaining joules.
        """
        if bits < 0:
            raise ValueError("bits must be non-negative")
        state = self.energy[node]
        if not state.alive:
            return 0.0
        per_bit = state.tx_cost_per_bit if direction == TX else state.rx_cost_per_bit
        charged = min(per_bit * bits, state.remaining)
        state.remaining -= charged
        self.energy_debited += charged
        if state.remaining <= 0.0:
            state.remaining = 0.0
            logger.debug(f"Node {node} ran out of energy at t={self.sim.now()}us")
            for queued in self.queues[node].flush():
                self.drop(queued, "node-dead")
        return state.remaining
