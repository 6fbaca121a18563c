import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from harness.compare import compare_report
from harness.runner import run_simulation
from harness.scenario import PROTOCOLS, ConfigurationError, Scenario, load_scenario
from harness.sweep import DEFAULT_NODE_COUNTS, DEFAULT_SEEDS, SweepSpec, run_sweep


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIGURATION = 1
EXIT_RUN_FAILURE = 2


def parse_int_list(text: str) -> tuple:
    """Parse ``"1,2,5"`` or an inclusive range ``"1..10"`` (ranges may be mixed with commas)."""
    values = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            low, high = (int(v) for v in part.split(".."))
            if high < low:
                raise argparse.ArgumentTypeError(f"empty range '{part}'")
            values.extend(range(low, high + 1))
        elif part:
            values.append(int(part))
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return tuple(values)


def parse_float_list(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def parse_protocols(text: str) -> tuple:
    names = tuple(p.strip() for p in text.split(",") if p.strip())
    unknown = [p for p in names if p not in PROTOCOLS]
    if unknown or not names:
        raise argparse.ArgumentTypeError(f"protocols must be among {', '.join(PROTOCOLS)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="manet-sim",
                                     description="Discrete-event MANET simulator comparing AntHocNet, DSR and ARA")
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="run one scenario")
    simulate.add_argument("--config", type=Path, help="scenario file (defaults when omitted)")
    simulate.add_argument("--protocol", choices=PROTOCOLS)
    simulate.add_argument("--seed", type=int)
    simulate.add_argument("--nodes", type=int, help="override node_count")
    simulate.add_argument("--duration", type=float, help="override duration_s")
    simulate.add_argument("--out", type=Path, default=Path("out"))

    sweep = commands.add_parser("sweep", help="run protocols x node counts x seeds")
    sweep.add_argument("--config", type=Path)
    sweep.add_argument("--protocols", type=parse_protocols, default=("anthocnet", "dsr"))
    sweep.add_argument("--nodes", type=parse_int_list, default=DEFAULT_NODE_COUNTS)
    sweep.add_argument("--seeds", type=parse_int_list, default=DEFAULT_SEEDS)
    sweep.add_argument("--p-err", type=parse_float_list, default=(), dest="p_errs")
    sweep.add_argument("--duration", type=float)
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.add_argument("--out", type=Path, default=Path("sweep"))

    report = commands.add_parser("report", help="compare protocols from an aggregate CSV")
    report.add_argument("--in", type=Path, required=True, dest="source")
    report.add_argument("--out", type=Path, required=True)
    report.add_argument("--protocols", type=parse_protocols)
    report.add_argument("--plots", action="store_true", help="also render PNG figures")
    return parser


def _template(args) -> Scenario:
    scenario = load_scenario(args.config) if args.config else Scenario()
    if getattr(args, "duration", None) is not None:
        scenario = scenario.with_changes(duration_s=args.duration)
    return scenario


def cmd_simulate(args) -> int:
    scenario = _template(args)
    changes = {}
    if args.protocol:
        changes["protocol"] = args.protocol
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.nodes is not None:
        changes["node_count"] = args.nodes
    scenario = scenario.with_changes(**changes).validate()
    report, trace_path = run_simulation(scenario, args.out)
    print(report.to_text(), end="")
    logger.info(f"Trace written to {trace_path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    template = _template(args).validate()
    spec = SweepSpec(template, tuple(args.nodes), tuple(args.protocols), tuple(args.seeds), tuple(args.p_errs))
    cells, _ = run_sweep(spec, args.jobs, args.out)
    failed = int((cells["error"] != "").sum())
    print(f"{len(cells)} cells, {failed} failed, results in {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    written = compare_report(args.source, args.out, args.protocols)
    if args.plots:
        from plot import render_report_plots

        written.update(render_report_plots(args.out))
    for name in sorted(written):
        print(written[name])
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "report": cmd_report}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        logger.error(f"Configuration error: {exc}")
        return EXIT_CONFIGURATION
    except Exception as exc:
        logger.error(f"Run failed: {exc}")
        logger.debug("Traceback", exc_info=True)
        return EXIT_RUN_FAILURE


if __name__ == "__main__":
    sys.exit(main())
