import os, sys
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.insert(1, project_root)
import math
import networkx as nx
import numpy as np
from sim.engine import Simulator, seconds
from sim.world import MobilityParams, Position, World
import unittest


class TestWorld(unittest.TestCase):

    def test_static_placement(self):
        sim = Simulator()
        world = World(sim, 2, mobility=MobilityParams(enabled=False), placement=[(0.0, 0.0), (250.0, 0.0)])
        world.start()
        self.assertEqual(world.position_at(1, seconds(100)), Position(250.0, 0.0))
        self.assertEqual(sim.pending(), 0)

    def test_range_boundary_is_inclusive(self):
        sim = Simulator()
        world = World(sim, 3, mobility=MobilityParams(enabled=False),
                      placement=[(0.0, 0.0), (250.0, 0.0), (500.001, 0.0)])
        self.assertTrue(world.in_range(0, 1, 0))
        self.assertTrue(world.in_range(1, 0, 0))
        self.assertFalse(world.in_range(1, 2, 0))
        self.assertEqual(world.neighbors_of(1, 0), {0})

    def test_invalid_queries(self):
        world = World(Simulator(), 2, mobility=MobilityParams(enabled=False), placement=[(0, 0), (1, 1)])
        with self.assertRaises(ValueError):
            world.in_range(0, 0, 0)
        with self.assertRaises(ValueError):
            world.position_at(5, 0)
        with self.assertRaises(ValueError):
            World(Simulator(), 2, placement=[(0, 0), (3000, 0)])

    def test_degenerate_speed_interval(self):
        """
        With v_min == v_max every leg runs at exactly that speed and stays in the arena.
        """
        sim = Simulator(seed=3)
        world = World(sim, 5, mobility=MobilityParams(v_min=10.0, v_max=10.0))
        world.start()
        for checkpoint in range(1, 6):
            sim.run_until(seconds(100 * checkpoint))
            for node in range(5):
                leg = world.leg(node)
                self.assertEqual(leg.speed, 10.0)
                self.assertTrue(0.0 <= leg.waypoint.x <= world.width)
                self.assertTrue(0.0 <= leg.waypoint.y <= world.height)

    def test_linear_interpolation(self):
        sim = Simulator(seed=5)
        world = World(sim, 1, mobility=MobilityParams(v_min=10.0, v_max=10.0))
        world.start()
        leg = world.leg(0)
        leg_length = math.hypot(leg.waypoint.x - leg.origin.x, leg.waypoint.y - leg.origin.y)
        here = world.position_at(0, seconds(0.1))
        moved = math.hypot(here.x - leg.origin.x, here.y - leg.origin.y)
        self.assertAlmostEqual(moved, min(1.0, leg_length), places=6)
        arrived = world.position_at(0, leg.arrive_at + 1)
        self.assertAlmostEqual(arrived.x, leg.waypoint.x, places=9)
        self.assertAlmostEqual(arrived.y, leg.waypoint.y, places=9)

    def test_vectorized_positions_match(self):
        sim = Simulator(seed=9)
        world = World(sim, 8)
        world.start()
        sim.run_until(seconds(42))
        positions = world.positions_at(sim.now())
        for node in range(8):
            p = world.position_at(node, sim.now())
            np.testing.assert_allclose(positions[node], [p.x, p.y], atol=1e-9)

    def test_trajectories_depend_only_on_seed(self):
        runs = []
        for _ in range(2):
            sim = Simulator(seed=11)
            world = World(sim, 6)
            world.start()
            sim.run_until(seconds(60))
            runs.append(world.positions_at(sim.now()).copy())
        np.testing.assert_array_equal(runs[0], runs[1])

    def test_topology_snapshot(self):
        placement = [(100.0 + 200.0 * i, 100.0) for i in range(4)]
        world = World(Simulator(), 4, mobility=MobilityParams(enabled=False), placement=placement)
        graph = world.topology(0)
        self.assertEqual(graph.number_of_edges(), 3)
        self.assertEqual(nx.shortest_path(graph, 0, 3), [0, 1, 2, 3])


if __name__ == '__main__':
    unittest.main()
