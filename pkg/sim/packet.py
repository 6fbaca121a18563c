from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


BROADCAST = -1

DATA_HEADER_BITS = 160
CONTROL_HEADER_BITS = 192
ADDRESS_BITS = 32
# ant path entries carry a node id and a time stamp
ANT_ENTRY_BITS = 64


class PacketKind(str, Enum):
    DATA = "DATA"
    DSR_RREQ = "DSR_RREQ"
    DSR_RREP = "DSR_RREP"
    DSR_RERR = "DSR_RERR"
    AHN_FANT_REACTIVE = "AHN_FANT_REACTIVE"
    AHN_FANT_PROACTIVE = "AHN_FANT_PROACTIVE"
    AHN_BANT = "AHN_BANT"
    AHN_LINK_NOTIFY = "AHN_LINK_NOTIFY"
    ARA_FANT = "ARA_FANT"
    ARA_BANT = "ARA_BANT"
    ARA_RERR = "ARA_RERR"
    ACK = "ACK"

    @property
    def is_control(self) -> bool:
        """Everything but DATA goes to the control class of the interface queue."""
        return self is not PacketKind.DATA

    @property
    def is_end_to_end(self) -> bool:
        """DATA and ACK are routed toward ``final_dst`` by every protocol."""
        return self in (PacketKind.DATA, PacketKind.ACK)


# kinds whose target is whoever receives the frame rather than a final destination
NEIGHBOR_SCOPED = frozenset({PacketKind.AHN_LINK_NOTIFY, PacketKind.ARA_RERR})


def header_bits(kind: PacketKind, body: Optional[dict] = None) -> int:
    """Header size of a packet of ``kind`` with protocol fields ``body``.

    DATA and ACK use a fixed 160-bit header. DSR requests and replies grow by
    one address per recorded node, AntHocNet ants by one path entry per
    visited node, and link notifications by one address per destination.
    """
    body = body or {}
    if kind.is_end_to_end:
        return DATA_HEADER_BITS
    if kind in (PacketKind.DSR_RREQ, PacketKind.DSR_RREP):
        return CONTROL_HEADER_BITS + ADDRESS_BITS * len(body.get("route", ()))
    if kind in (PacketKind.AHN_FANT_REACTIVE, PacketKind.AHN_FANT_PROACTIVE, PacketKind.AHN_BANT):
        return CONTROL_HEADER_BITS + ANT_ENTRY_BITS * len(body.get("path", ()))
    if kind is PacketKind.AHN_LINK_NOTIFY:
        return CONTROL_HEADER_BITS + ADDRESS_BITS * len(body.get("lost", ()))
    return CONTROL_HEADER_BITS


@dataclass
class Packet:
    """A frame handed between nodes.

    Attributes:
        kind (PacketKind): Packet type.
        src (int): Transmitter of the current hop.
        dst (int): Receiver of the current hop, or ``BROADCAST``.
        origin (int): Node that created the packet.
        final_dst (int): Final destination, or ``BROADCAST`` for neighbor-scoped kinds.
        gen_id (tuple): ``(origin, sequence)``, unique per packet generated by a node.
        ttl (int): Remaining hop budget.
        payload_bits (int): Application payload size.
        body (dict): Protocol-specific fields (route record, ant path, ...).
        created_at (int): Departure time of this copy at its origin, in microseconds.
        attempt (int): 0 for an original, n for the n-th end-to-end retransmission.
        hops (int): Hops traversed so far.
        path_trace (list): Nodes actually traversed, origin first.
        enqueued_at (int): When the copy entered the current transmitter's queue.
        last_hop_us (int): Queueing plus airtime spent on the previous hop.
    """

    kind: PacketKind
    src: int
    dst: int
    origin: int
    final_dst: int
    gen_id: tuple
    ttl: int
    payload_bits: int = 0
    body: dict = field(default_factory=dict)
    created_at: int = 0
    attempt: int = 0
    hops: int = 0
    path_trace: list = field(default_factory=list)
    enqueued_at: int = 0
    last_hop_us: int = 0

    def __post_init__(self):
        if self.ttl < 0:
            raise ValueError("ttl must be non-negative")
        if self.payload_bits < 0:
            raise ValueError("payload_bits must be non-negative")
        if not self.path_trace:
            self.path_trace = [self.origin]

    @property
    def size_bits(self) -> int:
        return header_bits(self.kind, self.body) + self.payload_bits

    @property
    def payload_id(self) -> tuple:
        """Application identity shared by every copy and retransmission."""
        return self.gen_id

    @property
    def packet_id(self) -> str:
        return f"{self.gen_id[0]}:{self.gen_id[1]}"

    def copy(self) -> "Packet":
        """Copy with independent list fields, so a receiver may mutate its own copy."""
        body = {key: list(value) if isinstance(value, list) else value
                for key, value in self.body.items()}
        return Packet(
            self.kind, self.src, self.dst, self.origin, self.final_dst, self.gen_id,
            self.ttl, self.payload_bits, body, self.created_at, self.attempt,
            self.hops, list(self.path_trace), self.enqueued_at, self.last_hop_us,
        )
