import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from routing.anthocnet import AntHocNetParams
from routing.ara import AraParams
from routing.dsr import DsrParams
from sim.net import RadioParams
from sim.packet import DATA_HEADER_BITS
from sim.traffic import TrafficParams
from sim.world import MobilityParams


logger = logging.getLogger(__name__)

PROTOCOLS = ("anthocnet", "dsr", "ara")

PROTOCOL_PARAMS = {
    "anthocnet": AntHocNetParams,
    "dsr": DsrParams,
    "ara": AraParams,
}


class ConfigurationError(ValueError):
    """Invalid scenario text or value.

    Attributes:
        key (str, optional): Offending key.
        line (int, optional): 1-based line number in the scenario file.
    """

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


@dataclass(frozen=True)
class Scenario:
    """Everything that determines one run.

    Defaults reproduce the reference node configuration: 180 s in a
    2500 x 1500 m arena, 250 m radio range at 2 Mbps, interface queues of 50
    packets and 100 J batteries.
    """

    duration_s: float = 180.0
    arena_width_m: float = 2500.0
    arena_height_m: float = 1500.0
    radius_m: float = 250.0
    bandwidth_bps: int = 2_000_000
    node_count: int = 16
    protocol: str = "anthocnet"
    seed: int = 1
    mobility: bool = True
    v_min: float = 1.0
    v_max: float = 20.0
    pause_s: float = 0.0
    placement: tuple = ()
    sessions: int = 10
    flows: tuple = ()
    rate_pps: float = 4.0
    packet_bytes: int = 512
    session_start_s: float = 0.0
    session_stop_s: Optional[float] = None
    retransmission: bool = False
    rtx_timeout_s: float = 2.0
    rtx_max: int = 3
    queue_length: int = 50
    initial_energy_j: float = 100.0
    tx_cost_j_per_bit: float = 1e-6
    rx_cost_j_per_bit: float = 0.5e-6
    p_err: float = 0.0
    overrides: tuple = ()

    def validate(self) -> "Scenario":
        """Check every value.

        Returns:
            Scenario: ``self``, for chaining.

        Raises:
            ConfigurationError: Naming the first offending key.
        """
        positive = ("duration_s", "arena_width_m", "arena_height_m", "radius_m", "bandwidth_bps",
                    "rate_pps", "rtx_timeout_s", "initial_energy_j", "v_min")
        for key in positive:
            if getattr(self, key) <= 0:
                raise ConfigurationError(f"{key} must be positive", key)
        non_negative = ("seed", "pause_s", "sessions", "session_start_s", "rtx_max",
                        "tx_cost_j_per_bit", "rx_cost_j_per_bit")
        for key in non_negative:
            if getattr(self, key) < 0:
                raise ConfigurationError(f"{key} must be non-negative", key)
        if self.node_count < 2:
            raise ConfigurationError("node_count must be at least 2", "node_count")
        if self.protocol not in PROTOCOLS:
            raise ConfigurationError(f"protocol must be one of {', '.join(PROTOCOLS)}", "protocol")
        if self.v_max < self.v_min:
            raise ConfigurationError("v_max must not be below v_min", "v_max")
        if self.packet_bytes * 8 <= DATA_HEADER_BITS:
            raise ConfigurationError(f"packet_bytes must exceed the {DATA_HEADER_BITS // 8}-byte header",
                                     "packet_bytes")
        if self.session_stop_s is not None and self.session_stop_s < self.session_start_s:
            raise ConfigurationError("session_stop_s must not precede session_start_s", "session_stop_s")
        if self.queue_length < 1:
            raise ConfigurationError("queue_length must be at least 1", "queue_length")
        if not 0.0 <= self.p_err <= 1.0:
            raise ConfigurationError("p_err must lie in [0, 1]", "p_err")
        if self.placement:
            if len(self.placement) != self.node_count:
                raise ConfigurationError("placement must list one position per node", "placement")
            for x, y in self.placement:
                if not (0.0 <= x <= self.arena_width_m and 0.0 <= y <= self.arena_height_m):
                    raise ConfigurationError(f"position ({x}, {y}) lies outside the arena", "placement")
        for source, destination in self.flows:
            if source == destination or not (0 <= source < self.node_count and 0 <= destination < self.node_count):
                raise ConfigurationError(f"invalid flow {source}>{destination}", "flows")
        for name in PROTOCOLS:
            self.protocol_params(name)
        return self

    def protocol_params(self, name: Optional[str] = None):
        """Protocol constants with this scenario's ``<protocol>.<field>`` overrides applied.

        Raises:
            ConfigurationError: If an override is out of range.
        """
        name = name or self.protocol
        mine = {key.split(".", 1)[1]: value for key, value in self.overrides if key.startswith(name + ".")}
        params = PROTOCOL_PARAMS[name](**mine)
        try:
            params.validate()
        except ValueError as exc:
            field_name = next((f for f in mine if str(exc).startswith(f)), None)
            key = f"{name}.{field_name}" if field_name else name
            raise ConfigurationError(str(exc), key) from exc
        return params

    def mobility_params(self) -> MobilityParams:
        return MobilityParams(self.mobility, self.v_min, self.v_max, self.pause_s)

    def radio_params(self) -> RadioParams:
        return RadioParams(self.bandwidth_bps, self.queue_length, self.p_err, self.initial_energy_j,
                           self.tx_cost_j_per_bit, self.rx_cost_j_per_bit)

    def traffic_params(self) -> TrafficParams:
        return TrafficParams(self.sessions, self.rate_pps, self.packet_bytes, self.session_start_s,
                             self.session_stop_s, self.retransmission, self.rtx_timeout_s, self.rtx_max,
                             tuple(self.flows))

    def with_changes(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def to_text(self) -> str:
        """Serialize every key in declaration order, overrides last."""
        lines = []
        for f in fields(self):
            if f.name == "overrides":
                continue
            lines.append(f"{f.name}={_format(f.name, getattr(self, f.name))}")
        lines += [f"{key}={_format_number(value)}" for key, value in self.overrides]
        return "\n".join(lines) + "\n"


def _format_number(value) -> str:
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _format(key: str, value) -> str:
    if value is None:
        return ""
    if key == "placement":
        return ";".join(f"{x!r},{y!r}" for x, y in value)
    if key == "flows":
        return ",".join(f"{s}>{d}" for s, d in value)
    return _format_number(value)


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("on", "true", "yes", "1"):
        return True
    if lowered in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on or off, got '{text}'")


def _parse_placement(text: str) -> tuple:
    if not text:
        return ()
    positions = []
    for item in text.split(";"):
        x, y = item.split(",")
        positions.append((float(x), float(y)))
    return tuple(positions)


def _parse_flows(text: str) -> tuple:
    if not text:
        return ()
    flows = []
    for item in text.split(","):
        source, destination = item.split(">")
        flows.append((int(source), int(destination)))
    return tuple(flows)


def _parse_optional_float(text: str) -> Optional[float]:
    return None if text == "" else float(text)


_PARSERS = {
    "duration_s": float,
    "arena_width_m": float,
    "arena_height_m": float,
    "radius_m": float,
    "bandwidth_bps": int,
    "node_count": int,
    "protocol": str,
    "seed": int,
    "mobility": _parse_bool,
    "v_min": float,
    "v_max": float,
    "pause_s": float,
    "placement": _parse_placement,
    "sessions": int,
    "flows": _parse_flows,
    "rate_pps": float,
    "packet_bytes": int,
    "session_start_s": float,
    "session_stop_s": _parse_optional_float,
    "retransmission": _parse_bool,
    "rtx_timeout_s": float,
    "rtx_max": int,
    "queue_length": int,
    "initial_energy_j": float,
    "tx_cost_j_per_bit": float,
    "rx_cost_j_per_bit": float,
    "p_err": float,
}


def _parse_override(key: str, text: str):
    name, _, field_name = key.partition(".")
    known = {f.name: f for f in fields(PROTOCOL_PARAMS[name])}
    if field_name not in known:
        raise KeyError(field_name)
    default = known[field_name].default
    return int(text) if isinstance(default, int) else float(text)


def parse_scenario(text: str) -> Scenario:
    """Build a Scenario from ``key=value`` lines; unset keys keep their defaults.

    Raises:
        ConfigurationError: On malformed lines, unknown keys or invalid values.
    """
    values = {}
    overrides = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"expected key=value, got '{line}'", line=number)
        key, value = (part.strip() for part in line.split("=", 1))
        if key.split(".", 1)[0] in PROTOCOL_PARAMS and "." in key:
            try:
                overrides[key] = _parse_override(key, value)
            except KeyError:
                raise ConfigurationError(f"unknown key '{key}'", key, number) from None
            except ValueError as exc:
                raise ConfigurationError(f"invalid value for {key}: {exc}", key, number) from exc
            continue
        if key not in _PARSERS:
            raise ConfigurationError(f"unknown key '{key}'", key, number)
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigurationError(f"invalid value for {key}: {exc}", key, number) from exc
    scenario = Scenario(**values, overrides=tuple(sorted(overrides.items())))
    return scenario.validate()


def load_scenario(path: Path) -> Scenario:
    """Read and validate a scenario file.

    Raises:
        ConfigurationError: If the file cannot be read or is invalid.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read scenario file {path}: {exc}") from exc
    scenario = parse_scenario(text)
    logger.info(f"Loaded scenario {path} ({scenario.protocol}, {scenario.node_count} nodes)")
    return scenario
