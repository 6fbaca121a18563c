import os, sys
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.insert(1, project_root)
import math
from collections import Counter
from scipy.stats import binom
from routing.anthocnet import (AntHocNet, AntHocNetParams, AntState, GenerationBest, NoRouteError,
                               PheromoneTable, accept_ant)
from sim.engine import seconds
from sim.traffic import TrafficGenerator
from tests.support import line_positions, static_network
import unittest


def cost(remaining_us, hops, hop_time=0.003):
    return (remaining_us / 1e6 + hops * hop_time) / 2.0


class TestAcceptance(unittest.TestCase):

    def setUp(self):
        self.best = GenerationBest(best_hops=3, best_us=30_000)

    def test_first_ant_of_a_generation_is_accepted(self):
        self.assertTrue(accept_ant(AntState([0, 1, 2, 3, 4, 5, 6, 7], [50_000] * 7), None, 1.5))

    def test_within_factor_is_accepted(self):
        ant = AntState([0, 1, 2, 3, 4], [10_000] * 4)
        self.assertEqual((ant.hops, ant.travel_us), (4, 40_000))
        self.assertAlmostEqual(ant.travel_time, 0.040)
        self.assertTrue(accept_ant(ant, self.best, 1.5))

    def test_too_many_hops_is_rejected(self):
        self.assertFalse(accept_ant(AntState([0, 1, 2, 3, 4, 5], [8_000] * 5), self.best, 1.5))

    def test_too_slow_is_rejected(self):
        self.assertFalse(accept_ant(AntState([0, 1, 2, 3, 4], [12_500] * 4), self.best, 1.5))

    def test_ant_exactly_on_the_bound_is_accepted(self):
        best = GenerationBest(best_hops=3, best_us=9_000)
        self.assertTrue(accept_ant(AntState([0, 1, 2, 3, 4], [3_375] * 4), best, 1.5))
        self.assertTrue(accept_ant(AntState([0, 1, 2, 3], [3_600] * 3), best, 1.2))
        self.assertFalse(accept_ant(AntState([0, 1, 2, 3], [3_600, 3_600, 3_601]), best, 1.2))

    def test_bound_is_exact_across_common_factors(self):
        """
        For every whole-millisecond best up to 200 ms, an ant taking exactly factor times as long passes
        and one microsecond more fails.
        """
        ratios = {1.1: (11, 10), 1.2: (6, 5), 1.3: (13, 10), 1.5: (3, 2), 2.0: (2, 1), 3.0: (3, 1)}
        for factor, (numerator, denominator) in ratios.items():
            for best_ms in range(1, 201):
                best_us = best_ms * 1000
                limit_us = best_us * numerator // denominator
                best = GenerationBest(best_hops=2, best_us=best_us)
                with self.subTest(factor=factor, best_ms=best_ms):
                    self.assertTrue(accept_ant(AntState([0, 1, 2], [limit_us]), best, factor))
                    self.assertFalse(accept_ant(AntState([0, 1, 2], [limit_us + 1]), best, factor))

    def test_factor_below_one_is_an_error(self):
        with self.assertRaises(ValueError):
            accept_ant(AntState([0, 1]), self.best, 0.9)

    def test_generation_best_tracks_both_minima(self):
        self.best.update(AntState([0, 1, 2, 3, 4], [5_000] * 4))
        self.assertEqual((self.best.best_hops, self.best.best_us), (3, 20_000))


class TestPheromoneTable(unittest.TestCase):

    def test_update_is_a_running_average(self):
        table = PheromoneTable()
        self.assertEqual(table.update(1, 9, 4.0, 0.7), 4.0)
        self.assertAlmostEqual(table.update(1, 9, 2.0, 0.7), 0.7 * 4.0 + 0.3 * 2.0)
        with self.assertRaises(ValueError):
            table.update(1, 9, 0.0, 0.7)

    def test_remove_reports_last_entry(self):
        table = PheromoneTable()
        table.update(1, 9, 1.0, 0.7)
        table.update(2, 9, 1.0, 0.7)
        table.update(1, 8, 1.0, 0.7)
        self.assertEqual(table.remove_neighbor(1), {8})
        self.assertFalse(table.remove(1, 9))
        self.assertTrue(table.remove(2, 9))
        self.assertEqual(table.destinations(), [])


class TestAntHocNet(unittest.TestCase):

    def setUp(self):
        self.sim, self.world, self.net, self.recorder, self.ahn = static_network(line_positions(4), AntHocNet)

    def test_backward_ant_deposits_expected_pheromone(self):
        """
        Ants of 256, 320 and 384 bits take 128, 160 and 192 us per hop at 2 Mbps.
        """
        self.ahn[0].reactive_setup(3)
        self.sim.run_until(seconds(0.1))
        self.assertAlmostEqual(self.ahn[0].pheromone.get(1, 3), 1.0 / cost(480, 3))
        self.assertAlmostEqual(self.ahn[1].pheromone.get(2, 3), 1.0 / cost(352, 2))
        self.assertAlmostEqual(self.ahn[2].pheromone.get(3, 3), 1.0 / cost(192, 1))
        self.assertEqual(self.ahn[0].pheromone.entries(3), {1: self.ahn[0].pheromone.get(1, 3)})

    def test_second_backward_ant_blends_with_gamma(self):
        self.ahn[0].reactive_setup(3)
        self.sim.run_until(seconds(0.1))
        first = self.ahn[0].pheromone.get(1, 3)
        self.ahn[0].reactive_setup(3)
        self.sim.run_until(seconds(0.2))
        self.assertAlmostEqual(self.ahn[0].pheromone.get(1, 3), 0.7 * first + 0.3 * first)

    def test_data_is_delivered_along_the_pheromone(self):
        traffic = TrafficGenerator(self.sim, self.net, self.recorder)
        traffic.originate_data(0, 3, 3936)
        self.sim.run_until(seconds(1))
        data = [r for r in self.recorder.records if r.is_data]
        self.assertEqual([(r.outcome, r.hops) for r in data], [("delivered", 3)])

    def test_link_failure_notification_cascades(self):
        self.ahn[0].reactive_setup(3)
        self.sim.run_until(seconds(0.1))
        self.ahn[2].handle_link_failure(3)
        self.sim.run_until(seconds(0.2))
        for node in range(3):
            self.assertFalse(self.ahn[node].pheromone.has(3))
        self.assertEqual([a.notifications_sent for a in self.ahn], [1, 1, 1, 0])

    def test_proactive_ants_every_interval_while_session_lasts(self):
        """
        A 10 s session with a 0.5 s interval launches 20 proactive ants.
        """
        self.ahn[0].reactive_setup(3)
        self.sim.run_until(seconds(0.1))
        self.ahn[0].on_session_start(3, self.sim.now() + seconds(10))
        self.sim.run_until(seconds(12))
        self.assertEqual(self.ahn[0].proactive_generations, 20)

    def test_no_proactive_ant_without_pheromone(self):
        self.ahn[0].on_session_start(3, seconds(5))
        self.sim.run_until(seconds(6))
        self.assertEqual(self.ahn[0].proactive_generations, 0)

    def test_old_generations_are_forgotten(self):
        self.ahn[0].reactive_setup(3)
        self.sim.run_until(seconds(0.1))
        self.ahn[0].reactive_setup(3)
        self.sim.run_until(seconds(0.2))
        self.assertEqual(len(self.ahn[1].generation_best), 2)

        self.sim.run_until(seconds(15))
        self.ahn[0].reactive_setup(3)
        self.sim.run_until(seconds(15.1))
        self.assertEqual(len(self.ahn[1].generation_best), 1)

    def test_proactive_sampling_prefers_the_shorter_path(self):
        """
        Source 0 reaches 4 in two hops through 1 or in three hops through 2 and 3.
        """
        positions = [(100.0, 300.0), (300.0, 330.0), (150.0, 90.0), (390.0, 90.0), (500.0, 300.0)]
        sim, world, _, _, ahn = static_network(positions, AntHocNet)
        topology = world.topology(0)
        self.assertEqual(set(topology.edges()), {(0, 1), (1, 4), (0, 2), (2, 3), (3, 4)})

        ahn[0].reactive_setup(4)
        sim.run_until(seconds(0.1))
        ahn[0].on_session_start(4, sim.now() + seconds(10))
        sim.run_until(seconds(11))
        short = ahn[0].pheromone.get(1, 4)
        long = ahn[0].pheromone.get(2, 4) or 0.0
        self.assertGreater(short, long)
        self.assertGreater(ahn[0].next_hop_probabilities(4, 2.0)[1], 0.5)

    def test_out_of_range_entries_are_not_usable(self):
        self.ahn[0].pheromone.update(3, 3, 5.0, 0.7)
        self.assertFalse(self.ahn[0].has_route(3))
        with self.assertRaises(NoRouteError):
            self.ahn[0].stochastic_next_hop(3, 2.0)


class TestStochasticNextHop(unittest.TestCase):

    def setUp(self):
        positions = [(500.0, 500.0), (650.0, 500.0), (500.0, 650.0), (1500.0, 500.0)]
        self.sim, _, _, _, self.ahn = static_network(positions, AntHocNet)
        self.node = self.ahn[0]
        self.node.pheromone.update(1, 3, 3.0, 0.7)
        self.node.pheromone.update(2, 3, 1.0, 0.7)

    def test_probabilities_follow_the_power_rule(self):
        for beta, expected in ((1.0, {1: 0.75, 2: 0.25}), (2.0, {1: 0.9, 2: 0.1})):
            probabilities = self.node.next_hop_probabilities(3, beta)
            self.assertAlmostEqual(sum(probabilities.values()), 1.0, delta=1e-9)
            for neighbor, p in expected.items():
                self.assertAlmostEqual(probabilities[neighbor], p, delta=1e-9)

    def test_sampling_frequencies(self):
        """
        100000 draws with weights (3, 1) and beta 1 stay inside a 1e-6 binomial interval around 0.75.
        """
        draws = 100_000
        counts = Counter(self.node.stochastic_next_hop(3, 1.0) for _ in range(draws))
        low, high = binom.interval(1 - 1e-6, draws, 0.75)
        self.assertTrue(low <= counts[1] <= high, f"{counts[1]} outside [{low}, {high}]")
        self.assertEqual(counts[1] + counts[2], draws)

    def test_sampling_frequencies_for_two_to_one(self):
        """
        Weights (2, 1) with beta 1 pick the heavier neighbor 2/3 of the time, within three standard deviations.
        """
        positions = [(500.0, 500.0), (650.0, 500.0), (500.0, 650.0), (1500.0, 500.0)]
        _, _, _, _, ahn = static_network(positions, AntHocNet, seed=7)
        ahn[0].pheromone.update(1, 3, 2.0, 0.7)
        ahn[0].pheromone.update(2, 3, 1.0, 0.7)
        draws, p = 100_000, 2.0 / 3.0
        heavier = sum(1 for _ in range(draws) if ahn[0].stochastic_next_hop(3, 1.0) == 1)
        sigma = math.sqrt(draws * p * (1 - p))
        self.assertLessEqual(abs(heavier - draws * p), 3 * sigma)


class TestParams(unittest.TestCase):

    def test_validation(self):
        for bad in (dict(acceptance_factor=0.5), dict(gamma=1.0), dict(beta_data=0.0),
                    dict(broadcast_probability=1.5), dict(proactive_interval_s=0.0),
                    dict(generation_lifetime_s=0.0)):
            with self.assertRaises(ValueError):
                AntHocNetParams(**bad).validate()


if __name__ == '__main__':
    unittest.main()
