import os, sys
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.insert(1, project_root)
import networkx as nx
from routing.dsr import Dsr, DsrParams, RouteCache
from sim.engine import seconds
from sim.packet import Packet, PacketKind
from sim.traffic import TrafficGenerator
from tests.support import line_positions, static_network
import unittest


class TestRouteCache(unittest.TestCase):

    def test_routes_must_start_at_owner_and_be_loop_free(self):
        cache = RouteCache(0)
        with self.assertRaises(ValueError):
            cache.add((1, 2, 3), 0)
        with self.assertRaises(ValueError):
            cache.add((0, 1, 0, 2), 0)

    def test_first_arrived_route_is_preferred(self):
        cache = RouteCache(0)
        self.assertTrue(cache.add((0, 4, 5, 3), 10))
        self.assertTrue(cache.add((0, 1, 3), 20))
        self.assertFalse(cache.add((0, 4, 5, 3), 30))
        self.assertEqual(cache.best(3), (0, 4, 5, 3))
        self.assertEqual(cache.entries(3)[0].inserted_at, 30)

    def test_purge_link_in_either_direction(self):
        cache = RouteCache(0)
        cache.add((0, 1, 2, 3), 0)
        cache.add((0, 4, 3), 0)
        cache.add((0, 1, 2), 0)
        self.assertEqual(cache.purge_link(2, 1), 2)
        self.assertEqual(cache.routes(3), [(0, 4, 3)])
        self.assertIsNone(cache.best(2))


class TestDsr(unittest.TestCase):

    def setUp(self):
        self.sim, self.world, self.net, self.recorder, self.dsr = static_network(line_positions(4), Dsr)
        self.traffic = TrafficGenerator(self.sim, self.net, self.recorder)

    def test_discovery_finds_the_shortest_path(self):
        """
        On a static line the discovered source route equals the breadth-first shortest path.
        """
        packet = self.traffic.originate_data(0, 3, 3936)
        self.sim.run_until(seconds(1))
        expected = tuple(nx.shortest_path(self.world.topology(0), 0, 3))
        self.assertEqual(self.dsr[0].cache.best(3), expected)
        self.assertEqual(self.dsr[3].cache.best(0), tuple(reversed(expected)))

        delivered = [r for r in self.recorder.records if r.is_data]
        self.assertEqual(len(delivered), 1)
        self.assertEqual(delivered[0].outcome, "delivered")
        self.assertEqual(delivered[0].hops, 3)
        self.assertEqual(packet.body["route"], list(expected))

    def test_route_reply_is_recorded_as_control_delivery(self):
        self.traffic.originate_data(0, 3, 3936)
        self.sim.run_until(seconds(1))
        kinds = {r.kind for r in self.recorder.records if r.outcome == "delivered"}
        self.assertIn("DSR_RREQ", kinds)
        self.assertIn("DSR_RREP", kinds)

    def test_cached_route_is_reused(self):
        self.traffic.originate_data(0, 3, 3936)
        self.sim.run_until(seconds(1))
        requests = self.dsr[0]._request_id
        self.traffic.originate_data(0, 3, 3936)
        self.sim.run_until(seconds(2))
        self.assertEqual(self.dsr[0]._request_id, requests)
        self.assertEqual(sum(1 for r in self.recorder.records if r.is_data and r.outcome == "delivered"), 2)

    def test_broken_link_is_reported_to_the_origin(self):
        self.traffic.originate_data(0, 3, 3936)
        self.sim.run_until(seconds(1))
        self.net.energy[2].remaining = 0.0

        self.traffic.originate_data(0, 3, 3936)
        self.sim.run_until(seconds(2))
        self.assertEqual(self.dsr[0].cache.routes(3), [])
        self.assertTrue(self.dsr[0].discovery_pending(3))
        self.assertEqual([r.outcome for r in self.recorder.records if r.is_data], ["delivered"])

        self.sim.run_until(seconds(10))
        outcomes = [r.outcome for r in self.recorder.records if r.is_data]
        self.assertEqual(outcomes, ["delivered", "dropped:no-route"])

    def test_intermediate_link_break_sends_route_error(self):
        """
        Without another cached route the origin rediscovers and still delivers the returned packet.
        """
        self.traffic.originate_data(0, 3, 3936)
        self.sim.run_until(seconds(1))
        requests = self.dsr[0]._request_id
        packet = Packet(PacketKind.DATA, 0, 2, 0, 3, (0, 99), 30, 3936, {"route": [0, 1, 2, 3]},
                        created_at=self.sim.now())
        self.dsr[1].handle_link_break((1, 2), packet)
        self.sim.run_until(seconds(2))
        self.assertTrue(any(r.kind == "DSR_RERR" for r in self.recorder.records))
        self.assertEqual(self.dsr[0]._request_id, requests + 1)
        outcomes = [r.outcome for r in self.recorder.records if r.packet_id == packet.packet_id]
        self.assertEqual(outcomes, ["delivered"])

    def test_origin_salvages_on_second_cached_route(self):
        """
        On a diamond the origin resends a packet broken mid-route on its other route, without a new request.
        """
        positions = [(100.0, 300.0), (250.0, 200.0), (250.0, 400.0), (400.0, 300.0)]
        sim, _, net, recorder, dsr = static_network(positions, Dsr)
        TrafficGenerator(sim, net, recorder).originate_data(0, 3, 3936)
        sim.run_until(seconds(1))
        self.assertEqual(len(dsr[0].cache.routes(3)), 2)
        route = dsr[0].cache.best(3)
        requests = dsr[0]._request_id

        packet = Packet(PacketKind.DATA, route[1], 3, 0, 3, (0, 77), 30, 3936, {"route": list(route)},
                        created_at=sim.now())
        dsr[route[1]].handle_link_break((route[1], 3), packet)
        sim.run_until(seconds(2))

        outcomes = [r.outcome for r in recorder.records if r.packet_id == packet.packet_id]
        self.assertEqual(outcomes, ["delivered"])
        self.assertEqual(dsr[0]._request_id, requests)
        remaining = dsr[0].cache.routes(3)
        self.assertEqual(len(remaining), 1)
        self.assertNotIn(route[1], remaining[0][1:-1])

    def test_unreachable_destination_gives_up_after_backoff(self):
        """
        Three discovery attempts with 1, 2 and 4 s back-off, then buffered data is dropped.
        """
        sim, _, net, recorder, dsr = static_network([(100.0, 100.0), (500.0, 100.0)], Dsr)
        traffic = TrafficGenerator(sim, net, recorder)
        traffic.originate_data(0, 1, 3936)

        sim.run_until(seconds(6.9))
        self.assertEqual(dsr[0]._request_id, 3)
        self.assertTrue(dsr[0].discovery_pending(1))
        sim.run_until(seconds(7.1))
        self.assertFalse(dsr[0].discovery_pending(1))
        self.assertEqual([r.outcome for r in recorder.records if r.is_data], ["dropped:no-route"])

    def test_params_validation(self):
        with self.assertRaises(ValueError):
            DsrParams(max_routes_per_destination=0).validate()
        with self.assertRaises(ValueError):
            DsrParams(control_ttl=0).validate()


if __name__ == '__main__':
    unittest.main()
