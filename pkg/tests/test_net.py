import os, sys
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.insert(1, project_root)
from sim.net import RX, TX, InterfaceQueue, RadioParams
from sim.packet import BROADCAST, Packet, PacketKind
from tests.support import static_network
import unittest


def data_packet(origin, final_dst, payload_bits=3936, seq=1):
    return Packet(PacketKind.DATA, origin, final_dst, origin, final_dst, (origin, seq), 32, payload_bits)


def control_packet(origin, dst, seq=1):
    return Packet(PacketKind.ARA_RERR, origin, dst, origin, dst, (origin, seq), 1)


class TestNetwork(unittest.TestCase):

    def test_airtime(self):
        """
        A 4096-bit frame takes 2048 us at 2 Mbps.
        """
        _, _, net, _, _ = static_network([(0, 0), (100, 0)])
        self.assertEqual(net.airtime_us(4096), 2048)
        self.assertEqual(net.airtime_us(1), 1)

    def test_unicast_delivery(self):
        sim, _, net, recorder, agents = static_network([(0, 0), (100, 0)])
        packet = data_packet(0, 1)
        net.send(0, packet)
        sim.run_until(10_000)

        self.assertEqual(len(agents[1].heard), 1)
        at, sender, copy = agents[1].heard[0]
        self.assertEqual((at, sender), (2048, 0))
        self.assertEqual(copy.hops, 1)
        self.assertEqual(copy.path_trace, [0, 1])
        self.assertEqual(copy.last_hop_us, 2048)
        self.assertEqual([r.outcome for r in recorder.records], ["delivered"])
        self.assertEqual(recorder.records[0].delay_us, 2048)

    def test_control_served_before_data(self):
        sim, _, net, _, agents = static_network([(0, 0), (100, 0)])
        first = data_packet(0, 1, seq=1)
        queued_data = data_packet(0, 1, seq=2)
        queued_control = control_packet(0, 1, seq=3)
        net.send(0, first)
        net.send(0, queued_data)
        net.send(0, queued_control)
        sim.run_until(100_000)
        order = [copy.gen_id[1] for _, _, copy in agents[1].heard]
        self.assertEqual(order, [1, 3, 2])

    def test_queue_full_drops(self):
        sim, _, net, recorder, _ = static_network([(0, 0), (100, 0)], radio=RadioParams(queue_capacity=2))
        accepted = [net.send(0, data_packet(0, 1, seq=i)) for i in range(4)]
        self.assertEqual(accepted, [True, True, True, False])
        self.assertEqual(recorder.records[-1].outcome, "dropped:queue-full")

    def test_interface_queue_capacity_spans_both_classes(self):
        queue = InterfaceQueue(capacity=2)
        self.assertTrue(queue.push(data_packet(0, 1)))
        self.assertTrue(queue.push(control_packet(0, 1)))
        self.assertFalse(queue.push(control_packet(0, 1, seq=2)))
        self.assertIs(queue.pop().kind, PacketKind.ARA_RERR)
        self.assertEqual(len(queue), 1)

    def test_unicast_out_of_range_raises_link_break(self):
        sim, _, net, recorder, agents = static_network([(0, 0), (400, 0)])
        packet = data_packet(0, 1)
        net.send(0, packet)
        sim.run_until(10_000)
        self.assertEqual(agents[1].heard, [])
        self.assertEqual(len(agents[0].link_breaks), 1)
        self.assertEqual(agents[0].link_breaks[0][1], 1)

    def test_broadcast_reaches_every_neighbor_and_charges_energy(self):
        sim, _, net, _, agents = static_network([(0, 0), (100, 0), (0, 100), (1000, 0)])
        packet = Packet(PacketKind.ARA_FANT, 0, BROADCAST, 0, 3, (0, 1), 16)
        net.send(0, packet)
        sim.run_until(10_000)

        self.assertEqual([len(a.heard) for a in agents], [0, 1, 1, 0])
        bits = packet.size_bits
        self.assertAlmostEqual(net.energy[0].initial - net.energy[0].remaining, bits * 1e-6)
        self.assertAlmostEqual(net.energy[1].initial - net.energy[1].remaining, bits * 0.5e-6)
        self.assertEqual(net.energy[3].remaining, net.energy[3].initial)
        used = sum(s.initial - s.remaining for s in net.energy)
        self.assertAlmostEqual(used, net.energy_debited)

    def test_total_channel_loss(self):
        """
        With p_err = 1 no copy is ever received; lost unicasts are recorded.
        """
        sim, _, net, recorder, agents = static_network([(0, 0), (100, 0)], radio=RadioParams(p_err=1.0))
        for seq in range(5):
            net.send(0, data_packet(0, 1, seq=seq))
        sim.run_until(100_000)
        self.assertEqual(agents[1].heard, [])
        self.assertEqual({r.outcome for r in recorder.records}, {"dropped:channel-loss"})
        self.assertEqual(len(recorder.records), 5)

    def test_node_death(self):
        sim, _, net, recorder, _ = static_network([(0, 0), (100, 0)],
                                                  radio=RadioParams(initial_energy=0.001))
        net.send(0, data_packet(0, 1, seq=1))
        self.assertEqual(net.energy[0].remaining, 0.0)
        self.assertFalse(net.alive(0))
        self.assertFalse(net.send(0, data_packet(0, 1, seq=2)))
        self.assertEqual(recorder.records[-1].outcome, "dropped:node-dead")
        self.assertEqual(net.debit_energy(0, TX, 100), 0.0)

    def test_frame_that_drains_the_battery_is_not_delivered(self):
        sim, _, net, recorder, agents = static_network([(0, 0), (100, 0)],
                                                       radio=RadioParams(initial_energy=0.001))
        net.send(0, data_packet(0, 1, seq=1))
        sim.run_until(10_000)
        self.assertEqual([r.outcome for r in recorder.records], ["dropped:node-dead"])
        self.assertEqual(agents[1].heard, [])

    def test_dead_neighbor_is_out_of_range(self):
        sim, _, net, _, agents = static_network([(0, 0), (100, 0)])
        net.energy[1].remaining = 0.0
        self.assertEqual(net.neighbors(0), set())
        net.send(0, data_packet(0, 1))
        sim.run_until(10_000)
        self.assertEqual(len(agents[0].link_breaks), 1)

    def test_negative_bits_rejected(self):
        _, _, net, _, _ = static_network([(0, 0), (100, 0)])
        with self.assertRaises(ValueError):
            net.debit_energy(0, RX, -1)


if __name__ == '__main__':
    unittest.main()
