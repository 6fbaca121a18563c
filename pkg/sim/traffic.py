import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .engine import HARNESS, Simulator, seconds
from .metrics import MetricsRecorder
from .net import Network
from .packet import DATA_HEADER_BITS, Packet, PacketKind


logger = logging.getLogger(__name__)

END_TO_END_TTL = 32


@dataclass(frozen=True)
class Session:
    """Fixed-rate flow standing in for an FTP transfer.

    Attributes:
        source (int): Sending node.
        destination (int): Receiving node.
        start (int): Session start in microseconds.
        stop (int): Session stop in microseconds (no emission at or after it).
        packet_size (int): Packet size in bits, header included.
        rate (float): Packets per second.
        retransmission (bool): Enable end-to-end ACKs and resends.
        rtx_timeout (int): Resend timeout in microseconds.
        rtx_max (int): Maximum resends per packet.
    """

    source: int
    destination: int
    start: int
    stop: int
    packet_size: int = 4096
    rate: float = 4.0
    retransmission: bool = False
    rtx_timeout: int = seconds(2.0)
    rtx_max: int = 3

    def __post_init__(self):
        if self.source == self.destination:
            raise ValueError("a session needs distinct source and destination")
        if self.start < 0 or self.stop < self.start:
            raise ValueError("session must satisfy 0 <= start <= stop")
        if self.rate <= 0:
            raise ValueError("session rate must be positive")
        if self.packet_size <= DATA_HEADER_BITS:
            raise ValueError(f"packet_size must exceed the {DATA_HEADER_BITS}-bit header")

    @property
    def interval(self) -> int:
        return max(1, int(round(1_000_000 / self.rate)))


@dataclass(frozen=True)
class TrafficParams:
    """Traffic pattern of a scenario.

    Attributes:
        sessions (int): Number of random flows when ``flows`` is empty.
        rate_pps (float): Packets per second per flow.
        packet_bytes (int): Packet size in bytes.
        start_s (float): Session start.
        stop_s (float, optional): Session stop, the run duration when None.
        retransmission (bool): End-to-end ACK and resend.
        rtx_timeout_s (float): Resend timeout.
        rtx_max (int): Maximum resends.
        flows (tuple): Explicit ``(source, destination)`` pairs.
    """

    sessions: int = 10
    rate_pps: float = 4.0
    packet_bytes: int = 512
    start_s: float = 0.0
    stop_s: Optional[float] = None
    retransmission: bool = False
    rtx_timeout_s: float = 2.0
    rtx_max: int = 3
    flows: tuple = field(default_factory=tuple)


def make_sessions(sim: Simulator, node_count: int, params: TrafficParams, duration_us: int) -> list:
    """Build the sessions of a scenario.

    Random flows use distinct ordered pairs drawn from the ``traffic-pairs``
    stream; at most ``node_count * (node_count - 1)`` of them exist.
    """
    stop = duration_us if params.stop_s is None else min(duration_us, seconds(params.stop_s))
    start = min(seconds(params.start_s), stop)
    pairs = list(params.flows)
    if not pairs:
        stream = sim.rng("traffic-pairs")
        wanted = min(params.sessions, node_count * (node_count - 1))
        chosen = set()
        while len(pairs) < wanted:
            pair = (stream.uniform_int(0, node_count - 1), stream.uniform_int(0, node_count - 1))
            if pair[0] != pair[1] and pair not in chosen:
                chosen.add(pair)
                pairs.append(pair)
    return [Session(s, d, start, stop, params.packet_bytes * 8, params.rate_pps,
                    params.retransmission, seconds(params.rtx_timeout_s), params.rtx_max)
            for s, d in pairs]


class TrafficGenerator:
    """Schedules DATA originations and runs the optional end-to-end ARQ.

    Each session starts at ``start`` plus a jitter drawn uniformly within one
    packet interval from its own ``("traffic", index)`` stream. With
    retransmission on, every DATA packet gets its own timer; an ACK from the
    destination cancels it, otherwise the packet is re-originated with the same
    ``gen_id`` up to ``rtx_max`` times.
    """

    def __init__(self, sim: Simulator, net: Network, recorder: MetricsRecorder):
        self.sim = sim
        self.net = net
        self.recorder = recorder
        self.sessions: list = []
        self.emitted = 0
        self.retransmitted = 0
        self._pending: dict = {}
        net.on_local_delivery = self._on_local_delivery

    def generate_traffic(self, sessions: Sequence[Session]) -> int:
        """Schedule the first emission of every session.

        Returns:
            int: Number of sessions that will emit at least one packet.
        """
        scheduled = 0
        for session in sessions:
            index = len(self.sessions)
            self.sessions.append(session)
            jitter = int(self.sim.rng("traffic", index).uniform() * session.interval)
            first = session.start + jitter
            if first < session.stop:
                self.sim.schedule(self._begin, HARNESS, first, "traffic-emission", index)
                scheduled += 1
        return scheduled

    def _begin(self, index: int) -> None:
        session = self.sessions[index]
        self.net.protocols[session.source].on_session_start(session.destination, session.stop)
        self._emit(index)

    def _emit(self, index: int) -> None:
        session = self.sessions[index]
        self.originate_data(session.source, session.destination, session.packet_size - DATA_HEADER_BITS,
                            session if session.retransmission else None)
        following = self.sim.now() + session.interval
        if following < session.stop:
            self.sim.schedule(self._emit, HARNESS, following, "traffic-emission", index)

    def originate_data(self, source: int, destination: int, payload_bits: int,
                       session: Optional[Session] = None) -> Packet:
        """Create one DATA packet at ``source`` and hand it to the routing protocol."""
        packet = Packet(PacketKind.DATA, source, -1, source, destination,
                        (source, self.net.next_sequence(source)), END_TO_END_TTL,
                        payload_bits, created_at=self.sim.now())
        if session is not None:
            packet.body["ack_requested"] = True
        self.emitted += 1
        self.recorder.originate(packet)
        if session is not None:
            timer = self.sim.schedule_in(session.rtx_timeout, self._retransmit, source,
                                         "timer-expiry", packet.gen_id)
            self._pending[packet.gen_id] = [packet.copy(), session, timer]
        self.net.protocols[source].originate(packet)
        return packet

    def _retransmit(self, gen_id: tuple) -> None:
        entry = self._pending.get(gen_id)
        if entry is None:
            return
        template, session, _ = entry
        if template.attempt >= session.rtx_max:
            del self._pending[gen_id]
            return
        template.attempt += 1
        packet = Packet(PacketKind.DATA, template.origin, -1, template.origin, template.final_dst,
                        gen_id, END_TO_END_TTL, template.payload_bits, {"ack_requested": True},
                        created_at=self.sim.now(), attempt=template.attempt)
        self.retransmitted += 1
        entry[2] = self.sim.schedule_in(session.rtx_timeout, self._retransmit, template.origin,
                                        "timer-expiry", gen_id)
        self.net.protocols[template.origin].originate(packet)

    def _on_local_delivery(self, node: int, packet: Packet) -> None:
        if packet.kind is PacketKind.ACK:
            entry = self._pending.pop(tuple(packet.body["ack_for"]), None)
            if entry is not None:
                self.sim.cancel(entry[2])
            return
        if packet.kind is PacketKind.DATA and packet.body.get("ack_requested"):
            ack = Packet(PacketKind.ACK, node, -1, node, packet.origin,
                         (node, self.net.next_sequence(node)), END_TO_END_TTL,
                         body={"ack_for": packet.gen_id}, created_at=self.sim.now())
            self.net.protocols[node].originate(ack)
