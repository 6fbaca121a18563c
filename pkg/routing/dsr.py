import logging
from dataclasses import dataclass
from typing import Optional, Sequence

from sim.engine import seconds
from sim.net import Network
from sim.packet import BROADCAST, Packet, PacketKind

from .base_protocol import ExpiringTable, ProtocolParams, RoutingProtocol


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DsrParams(ProtocolParams):
    """DSR constants; discovery retries back off exponentially from ``discovery_timeout_s``.

    Attributes:
        request_table_lifetime_s (float): Seconds a processed request id is remembered.
        max_routes_per_destination (int): Cached routes kept per destination.
    """

    request_table_lifetime_s: float = 60.0
    max_routes_per_destination: int = 16

    def validate(self) -> None:
        super().validate()
        if self.request_table_lifetime_s <= 0:
            raise ValueError("request_table_lifetime_s must be positive")
        if self.max_routes_per_destination < 1:
            raise ValueError("max_routes_per_destination must be at least 1")


@dataclass
class CachedRoute:
    route: tuple
    inserted_at: int


class RouteCache:
    """Source routes of one node, per destination, in order of first arrival.

    Every route starts at the owner and visits no node twice.
    """

    def __init__(self, owner: int, max_routes: int = 16):
        self.owner = owner
        self.max_routes = max_routes
        self._routes: dict = {}

    def add(self, route: Sequence[int], now: int) -> bool:
        """Insert ``route`` or refresh its timestamp.

        Returns:
            bool: True if the route was not cached before.

        Raises:
            ValueError: If the route does not start at the owner or contains a loop.
        """
        route = tuple(route)
        if len(route) < 2 or route[0] != self.owner:
            raise ValueError(f"route {route} does not start at node {self.owner}")
        if len(set(route)) != len(route):
            raise ValueError(f"route {route} contains a loop")
        entries = self._routes.setdefault(route[-1], [])
        for entry in entries:
            if entry.route == route:
                entry.inserted_at = now
                return False
        if len(entries) >= self.max_routes:
            return False
        entries.append(CachedRoute(route, now))
        return True

    def routes(self, destination: int) -> list:
        return [entry.route for entry in self._routes.get(destination, [])]

    def entries(self, destination: int) -> list:
        return list(self._routes.get(destination, []))

    def best(self, destination: int) -> Optional[tuple]:
        """The earliest-arrived route still cached."""
        entries = self._routes.get(destination)
        return entries[0].route if entries else None

    def purge_link(self, a: int, b: int) -> int:
        """Remove every route that uses the link between ``a`` and ``b``.

        Returns:
            int: Number of routes removed.
        """
        removed = 0
        for destination in list(self._routes):
            kept = [e for e in self._routes[destination] if not _uses_link(e.route, a, b)]
            removed += len(self._routes[destination]) - len(kept)
            if kept:
                self._routes[destination] = kept
            else:
                del self._routes[destination]
        return removed


def _uses_link(route: Sequence[int], a: int, b: int) -> bool:
    return any({route[i], route[i + 1]} == {a, b} for i in range(len(route) - 1))


class Dsr(RoutingProtocol):
    """Dynamic Source Routing agent.

    Route discovery floods a request that accumulates the nodes it visits; only
    the destination answers, returning the record along its reverse. DATA
    carries the full source route chosen at its origin. When a hop fails, the
    detecting node reports the broken link back to the origin, and the origin
    either salvages with another cached route or discovers again.
    """

    name = "dsr"

    def __init__(self, node: int, net: Network, params: DsrParams = DsrParams()):
        super().__init__(node, net, params)
        self.cache = RouteCache(node, params.max_routes_per_destination)
        self.seen_requests = ExpiringTable(seconds(params.request_table_lifetime_s))
        self._request_id = 0

    def has_route(self, destination: int) -> bool:
        return self.cache.best(destination) is not None

    def discovery_delay(self, attempt: int) -> int:
        return seconds(self.params.discovery_timeout_s) * 2 ** (attempt - 1)

    def send_discovery(self, destination: int) -> None:
        self._request_id += 1
        self._remember((self.node, self._request_id))
        request = self.new_packet(PacketKind.DSR_RREQ, BROADCAST, destination, self.params.control_ttl,
                                  {"route": [self.node], "request_id": self._request_id})
        self.send(request)

    def _remember(self, key: tuple) -> None:
        self.seen_requests.put(key, True, self.sim.now())

    def originate(self, packet: Packet) -> None:
        route = self.cache.best(packet.final_dst)
        if route is None:
            self.buffer(packet)
            return
        self._send_along(packet, route)

    def _send_along(self, packet: Packet, route: Sequence[int]) -> None:
        packet.body["route"] = list(route)
        packet.dst = route[route.index(self.node) + 1]
        self.send(packet)

    def receive(self, packet: Packet, sender: int) -> None:
        kind = packet.kind
        if kind is PacketKind.DSR_RREQ:
            self.handle_rreq(packet)
        elif kind is PacketKind.DSR_RREP:
            self.handle_rrep(packet)
        elif kind is PacketKind.DSR_RERR:
            self.handle_rerr(packet)
        elif kind.is_end_to_end:
            self.forward(packet)

    def handle_rreq(self, request: Packet) -> None:
        """Answer a route request at its target, otherwise extend and rebroadcast it once."""
        record = request.body["route"]
        if self.node in record:
            return
        if request.final_dst == self.node:
            route = record + [self.node]
            self.cache.add(list(reversed(route)), self.sim.now())
            if self.send_buffer.count(request.origin):
                self.route_found(request.origin)
            reply = self.new_packet(PacketKind.DSR_RREP, record[-1], request.origin, len(route),
                                    {"route": route, "request_id": request.body["request_id"]})
            self.send(reply)
            return
        key = (request.origin, request.body["request_id"])
        if key in self.seen_requests:
            return
        self._remember(key)
        if request.ttl <= 0:
            return
        request.ttl -= 1
        record.append(self.node)
        request.dst = BROADCAST
        self.send(request)

    def handle_rrep(self, reply: Packet) -> None:
        """Cache the route at the requester, otherwise pass the reply one hop back."""
        route = reply.body["route"]
        if self.node not in route:
            self.protocol_errors += 1
            self.drop(reply, "protocol-error")
            return
        index = route.index(self.node)
        if index == 0:
            self.cache.add(route, self.sim.now())
            self.route_found(route[-1])
            return
        reply.dst = route[index - 1]
        self.send(reply)

    def forward(self, packet: Packet) -> None:
        """Relay a source-routed packet to the next node of its embedded route."""
        route = packet.body.get("route")
        if not route or self.node not in route:
            self.protocol_errors += 1
            self.drop(packet, "protocol-error")
            return
        index = route.index(self.node)
        if index == len(route) - 1:
            if packet.final_dst == self.node:
                self.deliver(packet)
            else:
                self.protocol_errors += 1
                self.drop(packet, "protocol-error")
            return
        if packet.ttl <= 0:
            self.drop(packet, "ttl")
            return
        packet.ttl -= 1
        packet.dst = route[index + 1]
        self.send(packet)

    def handle_rerr(self, error: Packet) -> None:
        """Purge the broken link and pass the error on toward the origin.

        At the origin the undelivered packet carried by the error is sent again
        on another cached route, or buffered behind a new discovery.
        """
        self.cache.purge_link(*error.body["broken"])
        route = error.body["route"]
        if self.node not in route:
            self.protocol_errors += 1
            return
        index = route.index(self.node)
        if index < len(route) - 1:
            error.dst = route[index + 1]
            self.send(error)
            return
        undelivered = error.body.pop("undelivered", None)
        if undelivered is not None:
            self.retry(undelivered)

    def retry(self, packet: Packet) -> None:
        """Resend a packet originated here whose route broke."""
        alternate = self.cache.best(packet.final_dst)
        if alternate is not None:
            self._send_along(packet, alternate)
        else:
            packet.body.pop("route", None)
            self.buffer(packet)

    def on_link_break(self, packet: Packet, next_hop: int) -> None:
        self.handle_link_break((self.node, next_hop), packet)

    def handle_link_break(self, broken: tuple, packet: Packet) -> None:
        """Route maintenance after ``broken`` failed while carrying ``packet``.

        A DATA or ACK packet is never given up here: the origin retries it
        directly, any other node returns it to the origin inside the route error.
        """
        self.cache.purge_link(*broken)
        if not packet.kind.is_end_to_end:
            undelivered = packet.body.get("undelivered")
            if undelivered is not None:
                self.drop(undelivered, "link-break")
            self.drop(packet, "link-break")
            return
        if packet.origin == self.node:
            self.retry(packet)
            return
        route = packet.body["route"]
        prefix = list(reversed(route[:route.index(self.node) + 1]))
        error = self.new_packet(PacketKind.DSR_RERR, prefix[1], packet.origin, len(prefix),
                                {"route": prefix, "broken": list(broken), "undelivered": packet})
        self.send(error)
