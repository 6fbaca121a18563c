from collections import deque
from dataclasses import dataclass
from typing import Optional

from sim.packet import Packet


@dataclass
class BufferedPacket:
    packet: Packet
    expires_at: int


class SendBuffer:
    """Packets waiting for a route, oldest first.

    Args:
        capacity (int): Maximum number of buffered packets over all destinations.
        timeout (int): Microseconds a packet may wait before it expires.
    """

    def __init__(self, capacity: int = 64, timeout: int = 30_000_000):
        self.capacity = capacity
        self.timeout = timeout
        self._entries: deque = deque()

    def __len__(self) -> int:
        return len(self._entries)

    def count(self, destination: int) -> int:
        return sum(1 for e in self._entries if e.packet.final_dst == destination)

    def add(self, packet: Packet, now: int) -> list:
        """Buffer ``packet``; returns the oldest packets pushed out by overflow."""
        self._entries.append(BufferedPacket(packet, now + self.timeout))
        overflow = []
        while len(self._entries) > self.capacity:
            overflow.append(self._entries.popleft().packet)
        return overflow

    def pop(self, destination: int) -> list:
        """Remove and return the packets for ``destination`` in arrival order."""
        taken = [e.packet for e in self._entries if e.packet.final_dst == destination]
        self._entries = deque(e for e in self._entries if e.packet.final_dst != destination)
        return taken

    def expire(self, now: int) -> list:
        """Remove and return every packet whose waiting time is over."""
        expired = [e.packet for e in self._entries if e.expires_at <= now]
        self._entries = deque(e for e in self._entries if e.expires_at > now)
        return expired

    def drain(self) -> list:
        packets = [e.packet for e in self._entries]
        self._entries.clear()
        return packets

    def next_expiry(self) -> Optional[int]:
        return min((e.expires_at for e in self._entries), default=None)
