import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .packet import DATA_HEADER_BITS, Packet, PacketKind


logger = logging.getLogger(__name__)

DELIVERED = "delivered"
DUPLICATE = "duplicate"
DROPPED = "dropped"

TRACE_COLUMNS = ("departure_us", "packet_id", "kind", "origin", "final_dst",
                 "bits", "outcome", "delay_us", "hops")


@dataclass(frozen=True)
class TraceRecord:
    """One line of the plot file: the outcome of one packet copy."""

    departure_us: int
    packet_id: str
    kind: str
    origin: int
    final_dst: int
    bits: int
    outcome: str
    delay_us: Optional[int] = None
    hops: Optional[int] = None

    @property
    def is_data(self) -> bool:
        return self.kind == PacketKind.DATA.value

    @property
    def reached_target(self) -> bool:
        return self.outcome in (DELIVERED, DUPLICATE)

    @property
    def drop_reason(self) -> Optional[str]:
        if self.outcome.startswith(DROPPED + ":"):
            return self.outcome.split(":", 1)[1]
        return None

    def to_line(self) -> str:
        delay = "-" if self.delay_us is None else str(self.delay_us)
        hops = "-" if self.hops is None else str(self.hops)
        return "\t".join((str(self.departure_us), self.packet_id, self.kind, str(self.origin),
                          str(self.final_dst), str(self.bits), self.outcome, delay, hops))

    @classmethod
    def from_line(cls, line: str) -> "TraceRecord":
        fields = line.rstrip("\n").split("\t")
        if len(fields) != len(TRACE_COLUMNS):
            raise ValueError(f"trace line has {len(fields)} fields, expected {len(TRACE_COLUMNS)}")
        departure, packet_id, kind, origin, final_dst, bits, outcome, delay, hops = fields
        return cls(int(departure), packet_id, kind, int(origin), int(final_dst), int(bits), outcome,
                   None if delay == "-" else int(delay), None if hops == "-" else int(hops))


class MetricsRecorder:
    """Append-only observer of packet outcomes within one run.

    DATA copies reaching their destination are recorded ``delivered`` the first
    time their ``packet_id`` arrives and ``duplicate`` afterwards. Control
    packets are recorded ``delivered`` when a copy reaches its target. Every
    originated DATA packet ends with at least one record: those still in flight
    when the run ends are closed as ``dropped:unresolved`` by :meth:`finalize`.
    """

    def __init__(self):
        self.records: list = []
        self._originated: dict = {}
        self._resolved: set = set()
        self._delivered: set = set()

    def originate(self, packet: Packet) -> None:
        if packet.kind is PacketKind.DATA and packet.packet_id not in self._originated:
            self._originated[packet.packet_id] = packet.copy()

    def _append(self, packet: Packet, outcome: str, delay: Optional[int], hops: Optional[int]) -> None:
        self.records.append(TraceRecord(packet.created_at, packet.packet_id, packet.kind.value,
                                        packet.origin, packet.final_dst, packet.size_bits,
                                        outcome, delay, hops))
        if packet.kind is PacketKind.DATA:
            self._resolved.add(packet.packet_id)

    def data_arrived(self, packet: Packet, now: int) -> bool:
        """Record a DATA copy at its final destination.

        Returns:
            bool: True if this is the first copy of the packet to arrive.
        """
        first = packet.packet_id not in self._delivered
        self._delivered.add(packet.packet_id)
        self._append(packet, DELIVERED if first else DUPLICATE, now - packet.created_at, packet.hops)
        return first

    def control_reached(self, packet: Packet, now: int) -> None:
        self._append(packet, DELIVERED, now - packet.created_at, packet.hops)

    def drop(self, packet: Packet, reason: str) -> None:
        self._append(packet, f"{DROPPED}:{reason}", None, packet.hops)

    def finalize(self) -> None:
        """Close every originated DATA packet that never reached an outcome."""
        for packet_id, packet in self._originated.items():
            if packet_id not in self._resolved:
                self.drop(packet, "unresolved")

    def write_trace(self, path: Path) -> Path:
        path = Path(path)
        with path.open("w", encoding="utf-8", newline="\n") as handle:
            handle.write("#" + "\t".join(TRACE_COLUMNS) + "\n")
            for record in self.records:
                handle.write(record.to_line() + "\n")
        return path

    @staticmethod
    def read_trace(path: Path) -> list:
        with Path(path).open("r", encoding="utf-8") as handle:
            return [TraceRecord.from_line(line) for line in handle
                    if line.strip() and not line.startswith("#")]


def _kbps(bits: int, duration_s: float) -> float:
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    return bits / duration_s / 1000.0


def average_delay(records: Iterable[TraceRecord]) -> Optional[float]:
    """Mean delay in milliseconds of uniquely delivered DATA packets, None if none arrived."""
    delays = np.array([r.delay_us for r in records if r.is_data and r.outcome == DELIVERED],
                      dtype=np.int64)
    if delays.size == 0:
        return None
    return int(delays.sum()) / delays.size / 1000.0


def throughput(records: Iterable[TraceRecord], duration_s: float) -> float:
    """All bits that reached their target (headers, duplicates and control included), in kbps."""
    return _kbps(sum(r.bits for r in records if r.reached_target), duration_s)


def goodput(records: Iterable[TraceRecord], duration_s: float) -> float:
    """Payload bits of uniquely delivered DATA packets, in kbps."""
    return _kbps(sum(r.bits - DATA_HEADER_BITS for r in records
                     if r.is_data and r.outcome == DELIVERED), duration_s)


def overhead(throughput_kbps: float, goodput_kbps: float) -> tuple:
    """Overhead as ``(kbps, fraction of throughput)``."""
    kbps = max(0.0, throughput_kbps - goodput_kbps)
    return kbps, (kbps / throughput_kbps if throughput_kbps > 0 else 0.0)


def pdr(records: Iterable[TraceRecord]) -> Optional[float]:
    """Unique DATA deliveries over DATA packets generated, None if nothing was generated."""
    generated, delivered = set(), set()
    for r in records:
        if r.is_data:
            generated.add(r.packet_id)
            if r.outcome == DELIVERED:
                delivered.add(r.packet_id)
    if not generated:
        return None
    return len(delivered) / len(generated)


def energy_utilization(states: Sequence) -> tuple:
    """Energy used per node and in total.

    Args:
        states (Sequence[EnergyState]): Final energy state of each node.

    Returns:
        tuple: ``(total joules, per-node joules list, dead node count)``.
    """
    used = np.array([s.initial - s.remaining for s in states], dtype=float)
    dead = sum(1 for s in states if s.remaining <= 0.0)
    return float(used.sum()), [float(u) for u in used], dead


@dataclass
class MetricsReport:
    """Aggregates of one run."""

    avg_delay_ms: Optional[float]
    throughput_kbps: float
    goodput_kbps: float
    overhead_kbps: float
    overhead_fraction: float
    pdr: Optional[float]
    energy_used_joules: float
    energy_per_node: list = field(default_factory=list)
    dead_nodes: int = 0
    generated: int = 0
    delivered: int = 0
    dropped: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        """Flat mapping used for CSV rows; absent values are empty strings."""
        row = {
            "avg_delay_ms": self.avg_delay_ms,
            "throughput_kbps": self.throughput_kbps,
            "goodput_kbps": self.goodput_kbps,
            "overhead_kbps": self.overhead_kbps,
            "overhead_fraction": self.overhead_fraction,
            "pdr": self.pdr,
            "energy_used_joules": self.energy_used_joules,
            "energy_per_node_joules": (self.energy_used_joules / len(self.energy_per_node)
                                       if self.energy_per_node else 0.0),
            "dead_nodes": self.dead_nodes,
            "generated": self.generated,
            "delivered": self.delivered,
            "dropped": sum(self.dropped.values()),
        }
        return {key: ("" if value is None else value) for key, value in row.items()}

    def to_text(self) -> str:
        lines = [f"{key}={'-' if value == '' else value}" for key, value in self.as_row().items()]
        lines += [f"dropped.{reason}={count}" for reason, count in sorted(self.dropped.items())]
        lines += [f"energy.node{i}={used!r}" for i, used in enumerate(self.energy_per_node)]
        return "\n".join(lines) + "\n"


def build_report(records: Sequence[TraceRecord], duration_s: float, energy_states: Sequence) -> MetricsReport:
    """Compute every metric of a run from its trace records and final energy states."""
    thr = throughput(records, duration_s)
    good = goodput(records, duration_s)
    over_kbps, over_fraction = overhead(thr, good)
    total, per_node, dead = energy_utilization(energy_states)
    dropped = Counter(r.drop_reason for r in records if r.drop_reason is not None)
    data_ids = {r.packet_id for r in records if r.is_data}
    delivered = {r.packet_id for r in records if r.is_data and r.outcome == DELIVERED}
    return MetricsReport(
        avg_delay_ms=average_delay(records),
        throughput_kbps=thr,
        goodput_kbps=good,
        overhead_kbps=over_kbps,
        overhead_fraction=over_fraction,
        pdr=pdr(records),
        energy_used_joules=total,
        energy_per_node=per_node,
        dead_nodes=dead,
        generated=len(data_ids),
        delivered=len(delivered),
        dropped=dict(sorted(dropped.items())),
    )
