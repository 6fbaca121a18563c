import os, sys
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if project_root not in sys.path:
    sys.path.insert(1, project_root)
from routing.base_protocol import ProtocolParams, RoutingProtocol
from sim.engine import Simulator
from sim.metrics import MetricsRecorder
from sim.net import Network, RadioParams
from sim.world import MobilityParams, World


def line_positions(count, spacing=200.0, y=100.0):
    """Nodes on a horizontal line; with the default 250 m radius only neighbors hear each other."""
    return [(100.0 + i * spacing, y) for i in range(count)]


def static_network(positions, protocol=None, params=None, radio=RadioParams(), seed=1):
    """Wire a static world, a network and one agent per node.

    Returns:
        tuple: ``(sim, world, net, recorder, agents)``.
    """
    sim = Simulator(seed)
    recorder = MetricsRecorder()
    world = World(sim, len(positions), mobility=MobilityParams(enabled=False), placement=positions)
    net = Network(sim, world, recorder, radio)
    protocol = protocol or RecordingProtocol
    agents = [protocol(node, net, params) if params is not None else protocol(node, net)
              for node in range(len(positions))]
    net.attach(agents)
    return sim, world, net, recorder, agents


class RecordingProtocol(RoutingProtocol):
    """Agent that remembers what it hears and sends DATA straight to ``final_dst``."""

    name = "recording"

    def __init__(self, node, net, params=None):
        super().__init__(node, net, params or ProtocolParams())
        self.heard = []
        self.link_breaks = []
        self.originated = []

    def originate(self, packet):
        self.originated.append(packet)
        packet.dst = packet.final_dst
        self.send(packet)

    def receive(self, packet, sender):
        self.heard.append((self.sim.now(), sender, packet))
        if packet.kind.is_end_to_end and packet.final_dst == self.node:
            self.deliver(packet)

    def on_link_break(self, packet, next_hop):
        self.link_breaks.append((packet, next_hop))

    def has_route(self, destination):
        return True

    def send_discovery(self, destination):
        pass
