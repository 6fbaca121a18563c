import logging
from pathlib import Path
from typing import Optional

from routing.anthocnet import AntHocNet
from routing.ara import Ara
from routing.dsr import Dsr
from sim.engine import Simulator, seconds
from sim.metrics import MetricsRecorder, MetricsReport, build_report
from sim.net import Network
from sim.traffic import TrafficGenerator, make_sessions
from sim.world import World

from .scenario import Scenario


logger = logging.getLogger(__name__)

PROTOCOL_CLASSES = {
    "anthocnet": AntHocNet,
    "dsr": Dsr,
    "ara": Ara,
}


class Simulation:
    """One fully wired run: engine, world, network, routing agents, traffic and recorder.

    Args:
        scenario (Scenario): Validated before anything is built.
    """

    def __init__(self, scenario: Scenario):
        scenario.validate()
        self.scenario = scenario
        self.duration = seconds(scenario.duration_s)
        self.sim = Simulator(scenario.seed)
        self.recorder = MetricsRecorder()
        self.world = World(self.sim, scenario.node_count, scenario.arena_width_m, scenario.arena_height_m,
                           scenario.radius_m, scenario.mobility_params(), scenario.placement or None)
        self.net = Network(self.sim, self.world, self.recorder, scenario.radio_params())
        params = scenario.protocol_params()
        protocol = PROTOCOL_CLASSES[scenario.protocol]
        self.protocols = [protocol(node, self.net, params) for node in range(scenario.node_count)]
        self.net.attach(self.protocols)
        self.traffic = TrafficGenerator(self.sim, self.net, self.recorder)
        self.sessions = make_sessions(self.sim, scenario.node_count, scenario.traffic_params(), self.duration)
        self.report: Optional[MetricsReport] = None

    def run(self) -> MetricsReport:
        """Run to the scenario horizon and compute the report."""
        if self.report is not None:
            return self.report
        logger.info(f"Running {self.scenario.protocol} with {self.scenario.node_count} nodes, "
                    f"seed {self.scenario.seed}, for {self.scenario.duration_s}s")
        self.world.start()
        for protocol in self.protocols:
            protocol.start()
        self.traffic.generate_traffic(self.sessions)
        fired = self.sim.run_until(self.duration)
        for protocol in self.protocols:
            protocol.finish()
        self.recorder.finalize()
        self.report = build_report(self.recorder.records, self.scenario.duration_s, self.net.energy)
        logger.info(f"Finished after {fired} events: pdr={self.report.pdr}, "
                    f"avg_delay_ms={self.report.avg_delay_ms}")
        return self.report


def run_simulation(scenario: Scenario, out_dir: Optional[Path] = None) -> tuple:
    """Run one scenario and optionally write its artifacts.

    With ``out_dir`` the trace, the report and the scenario actually used are
    written there as ``trace.tsv``, ``report.txt`` and ``scenario.txt``.

    Returns:
        tuple: ``(MetricsReport, trace path or None)``.
    """
    simulation = Simulation(scenario)
    report = simulation.run()
    if out_dir is None:
        return report, None
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = simulation.recorder.write_trace(out_dir / "trace.tsv")
    (out_dir / "report.txt").write_text(report.to_text(), encoding="utf-8")
    (out_dir / "scenario.txt").write_text(scenario.to_text(), encoding="utf-8")
    return report, trace_path
