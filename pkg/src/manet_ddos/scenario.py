"""Scenario files: flat TOML keys plus optional ``[[flow]]`` and ``[[link_break]]`` blocks."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .engine import substream
from .mac import Thresholds
from .network import SCHEMES, SimConfig
from .topology import Topology, build_topology, place_nodes
from .traffic import FlowSpec, select_flows


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    pass


@dataclass
class Scenario:
    node_count: int = 80
    area: tuple[float, float] = (1200.0, 1200.0)
    radio_range: float = 250.0
    link_capacity: float = 2_000_000.0
    sim_time: float = 60.0
    packet_size: int = 512
    traffic: str = "CBR"
    scheme: str = "proposed"
    seed: int = 1
    delta_bps: float = 5_000.0
    interval_T_s: float = 1.0
    epsilon_rel: float = 0.05
    theta_busy: float = 0.8
    theta_rts_per_s: float = 150.0
    theta_retx: float = 60.0
    mac_max_retries: int = 7
    backoff_mean_s: float = 1e-3
    queue_capacity: int = 50
    control_packet_size: int = 64
    swan_increment_bps: float = 5_000.0
    swan_decrease: float = 0.3
    bucket_width_s: float = 1.0
    legit_flows: int = 5
    legit_rate_bps: float = 50_000.0
    legit_start_s: float = 0.0
    attack_flows: int = 1
    attack_rate_bps: float = 500_000.0
    attack_start_s: float = 10.0
    min_hops: int = 2
    flows: list[FlowSpec] = field(default_factory=list)
    link_breaks: list[tuple[float, int, int]] = field(default_factory=list)

    def thresholds(self) -> Thresholds:
        return Thresholds(self.theta_busy, self.theta_rts_per_s, self.theta_retx)

    def config(self) -> SimConfig:
        return SimConfig(
            scheme=self.scheme, link_capacity=self.link_capacity,
            packet_size=self.packet_size, sim_time=self.sim_time,
            interval=self.interval_T_s, delta=self.delta_bps, epsilon=self.epsilon_rel,
            thresholds=self.thresholds(), max_retries=self.mac_max_retries,
            backoff_mean=self.backoff_mean_s, queue_capacity=self.queue_capacity,
            control_packet_size=self.control_packet_size,
            swan_increment=self.swan_increment_bps, swan_decrease=self.swan_decrease,
            bucket_width=self.bucket_width_s, link_breaks=list(self.link_breaks),
        )

    def with_(self, **changes) -> Scenario:
        return dataclasses.replace(self, **changes)

    def topology(self, seed: int | None = None) -> Topology:
        seed = self.seed if seed is None else seed
        nodes = place_nodes(self.node_count, *self.area, substream(seed, "placement"))
        return build_topology(nodes, self.radio_range, self.area)

    def resolve_flows(self, topology: Topology, seed: int | None = None) -> list[FlowSpec]:
        """Explicit flows if the file lists any, otherwise a seeded mix."""
        if self.flows:
            for f in self.flows:
                for n in (f.source_id, f.destination_id):
                    if not 0 <= n < self.node_count:
                        raise ValidationError(f"flow {f.flow_id} references unknown node {n}")
            return list(self.flows)
        seed = self.seed if seed is None else seed
        return select_flows(
            topology, substream(seed, "flows"), legit_count=self.legit_flows,
            legit_rate=self.legit_rate_bps, attack_count=self.attack_flows,
            attack_rate=self.attack_rate_bps, packet_size=self.packet_size,
            legit_start=self.legit_start_s, attack_start=self.attack_start_s,
            min_hops=self.min_hops)


_FLOAT_KEYS = {
    "radio_range": "radio_range", "radio_range_m": "radio_range",
    "link_capacity_bps": "link_capacity", "sim_time_s": "sim_time",
    "delta_bps": "delta_bps", "interval_T_s": "interval_T_s", "epsilon_rel": "epsilon_rel",
    "theta_busy": "theta_busy", "theta_rts_per_s": "theta_rts_per_s",
    "theta_retx": "theta_retx", "backoff_mean_s": "backoff_mean_s",
    "swan_increment_bps": "swan_increment_bps", "swan_decrease": "swan_decrease",
    "bucket_width_s": "bucket_width_s", "legit_rate_bps": "legit_rate_bps",
    "legit_start_s": "legit_start_s", "attack_rate_bps": "attack_rate_bps",
    "attack_start_s": "attack_start_s",
}
_INT_KEYS = {
    "node_count": "node_count", "packet_size_bytes": "packet_size", "seed": "seed",
    "mac_max_retries": "mac_max_retries", "queue_capacity": "queue_capacity",
    "control_packet_size_bytes": "control_packet_size", "legit_flows": "legit_flows",
    "attack_flows": "attack_flows", "min_hops": "min_hops",
}
_STR_KEYS = {"traffic": "traffic", "scheme": "scheme", "routing": None, "mac": None}


def _number(key, value, kind):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"field {key!r}: expected a number, got {value!r}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ParseError(f"field {key!r}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


def parse_scenario(text: str) -> Scenario:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"scenario syntax error: {exc}") from None
    sc = Scenario()
    values = {}
    for key, value in raw.items():
        if key in ("flow", "link_break"):
            continue
        if key == "area_m":
            if not (isinstance(value, list) and len(value) == 2):
                raise ParseError("field 'area_m': expected [width, height]")
            values["area"] = (_number(key, value[0], float), _number(key, value[1], float))
        elif key in _FLOAT_KEYS:
            values[_FLOAT_KEYS[key]] = _number(key, value, float)
        elif key in _INT_KEYS:
            values[_INT_KEYS[key]] = _number(key, value, int)
        elif key in _STR_KEYS:
            if not isinstance(value, str):
                raise ParseError(f"field {key!r}: expected a string")
            if _STR_KEYS[key] is not None:
                values[_STR_KEYS[key]] = value
        else:
            raise ParseError(f"unknown field {key!r}")
    flows = []
    for i, block in enumerate(raw.get("flow", [])):
        try:
            flows.append(FlowSpec(
                flow_id=int(block.get("id", i)),
                source_id=int(block["source"]),
                destination_id=int(block["destination"]),
                data_rate=_number("flow.rate_bps", block["rate_bps"], float),
                packet_size=int(block.get("packet_size_bytes",
                                          values.get("packet_size", sc.packet_size))),
                start_time=float(block.get("start_s", 0.0)),
                is_attacker=bool(block.get("attacker", False)),
            ))
        except KeyError as exc:
            raise ParseError(f"flow block {i}: missing field {exc.args[0]!r}") from None
        except ValueError as exc:
            raise ValidationError(f"flow block {i}: {exc}") from None
    breaks = []
    for i, block in enumerate(raw.get("link_break", [])):
        try:
            breaks.append((float(block["time_s"]), int(block["u"]), int(block["v"])))
        except KeyError as exc:
            raise ParseError(f"link_break block {i}: missing field {exc.args[0]!r}") from None
    sc = dataclasses.replace(sc, **values, flows=flows, link_breaks=breaks)
    validate(sc)
    return sc


def validate(sc: Scenario) -> None:
    positive = {
        "node_count": sc.node_count, "radio_range": sc.radio_range,
        "link_capacity_bps": sc.link_capacity, "sim_time_s": sc.sim_time,
        "packet_size_bytes": sc.packet_size, "delta_bps": sc.delta_bps,
        "interval_T_s": sc.interval_T_s, "epsilon_rel": sc.epsilon_rel,
        "theta_busy": sc.theta_busy, "theta_rts_per_s": sc.theta_rts_per_s,
        "theta_retx": sc.theta_retx, "backoff_mean_s": sc.backoff_mean_s,
        "queue_capacity": sc.queue_capacity, "bucket_width_s": sc.bucket_width_s,
        "legit_rate_bps": sc.legit_rate_bps, "attack_rate_bps": sc.attack_rate_bps,
        "control_packet_size_bytes": sc.control_packet_size,
        "swan_increment_bps": sc.swan_increment_bps,
        "area width": sc.area[0], "area height": sc.area[1],
    }
    for name, v in positive.items():
        if not v > 0:
            raise ValidationError(f"{name} must be positive, got {v}")
    for name, v in {"mac_max_retries": sc.mac_max_retries, "legit_flows": sc.legit_flows,
                    "attack_flows": sc.attack_flows, "min_hops": sc.min_hops,
                    "legit_start_s": sc.legit_start_s,
                    "attack_start_s": sc.attack_start_s}.items():
        if v < 0:
            raise ValidationError(f"{name} must be non-negative, got {v}")
    if not 0 < sc.swan_decrease < 1:
        raise ValidationError("swan_decrease must lie in (0, 1)")
    if sc.traffic.upper() != "CBR":
        raise ValidationError(f"only CBR traffic is supported, got {sc.traffic!r}")
    if sc.scheme not in SCHEMES:
        raise ValidationError(f"scheme must be one of {SCHEMES}, got {sc.scheme!r}")
    ids = [f.flow_id for f in sc.flows]
    if len(set(ids)) != len(ids):
        raise ValidationError("flow ids must be unique")
    for f in sc.flows:
        for n in (f.source_id, f.destination_id):
            if not 0 <= n < sc.node_count:
                raise ValidationError(f"flow {f.flow_id} references unknown node {n}")
    for t, u, v in sc.link_breaks:
        if t < 0 or not (0 <= u < sc.node_count and 0 <= v < sc.node_count):
            raise ValidationError(f"invalid link_break ({t}, {u}, {v})")


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read scenario {path}: {exc.strerror}") from exc
    try:
        return parse_scenario(text)
    except (ParseError, ValidationError) as exc:
        raise type(exc)(f"{path}: {exc}") from None


DEFAULT_SCENARIO = Path(__file__).with_name("table1.toml")
