import logging
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any

import yaml

from src.cluster.failover import (
    DEFAULT_CHECK_INTERVAL,
    DEFAULT_HEARTBEAT_INTERVAL,
    DEFAULT_JITTER,
    DEFAULT_OFFLINE_TIMEOUT,
)
from src.cluster.models import (
    LayoutError,
    Placement,
    ServiceLayout,
    ServiceSpec,
    StartTimeModel,
)
from src.metrics.collector import DEFAULT_BUFFER_LIMIT, DEFAULT_METRIC_INTERVAL, INGEST_SERVICE, LoadModel
from src.metrics.git_sync import DEFAULT_RESYNC_BYTES
from src.metrics.models import DEFAULT_PAYLOAD_BYTES
from src.protocol.reassembly import DEFAULT_IDLE_TIMEOUT
from src.protocol.transport import DEFAULT_MAX_RETRIES
from src.radio.duty_cycle import POLICIES
from src.radio.params import RadioError, RadioParams
from src.radio.propagation import NodePosition, PathLossModel
from src.sim.kernel import US_PER_HOUR, US_PER_MS, US_PER_MIN, US_PER_S

logger = logging.getLogger("loraheal")

_UNITS = {"us": 1, "ms": US_PER_MS, "s": US_PER_S, "m": US_PER_MIN, "h": US_PER_HOUR}
_DURATION = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(us|ms|s|m|h)\s*$")

OFFSET_MODES = ("synchronized", "staggered", "explicit")
FAULT_KINDS = ("kill_node", "revive_node", "kill_service")


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.message = message
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(f"{where}{message}")


def parse_duration(value: Any) -> int:
    """Seconds as a number, or a string with a us/ms/s/m/h suffix, to µs."""
    if isinstance(value, bool):
        raise ValueError(f"not a duration: {value!r}")
    if isinstance(value, (int, float)):
        return int(round(value * US_PER_S))
    if isinstance(value, str):
        m = _DURATION.match(value)
        if m:
            return int(round(float(m.group(1)) * _UNITS[m.group(2)]))
    raise ValueError(f"not a duration: {value!r} (use e.g. 90, '90s', '5m', '6h')")


# -- dataclasses ------------------------------------------------------------


@dataclass(frozen=True)
class NodeConfig:
    id: int
    position: tuple[float, float, float]
    reports_metrics: bool = True
    load: LoadModel = field(default_factory=LoadModel)

    def to_position(self) -> NodePosition:
        return NodePosition(self.id, *self.position)


@dataclass(frozen=True)
class OffsetConfig:
    mode: str = "staggered"
    explicit: dict[int, int] = field(default_factory=dict)

    def resolve(self, reporters: list[int], interval: int) -> dict[int, int]:
        if self.mode == "synchronized":
            return {n: 0 for n in reporters}
        if self.mode == "explicit":
            return {n: self.explicit.get(n, 0) for n in reporters}
        count = max(len(reporters), 1)
        return {n: i * interval // count for i, n in enumerate(reporters)}


@dataclass(frozen=True)
class ReceptionConfig:
    capture: bool = True
    capture_margin_db: float = 6.0
    frame_loss_rate: float = 0.0


@dataclass(frozen=True)
class DutyCycleConfig:
    budget: Fraction = Fraction(1, 100)
    window: int = US_PER_HOUR
    policy: str = "window"


@dataclass(frozen=True)
class TransportConfig:
    max_retries: int = DEFAULT_MAX_RETRIES
    idle_timeout: int = DEFAULT_IDLE_TIMEOUT


@dataclass(frozen=True)
class ClusterConfig:
    heartbeat_interval: int = DEFAULT_HEARTBEAT_INTERVAL
    offline_timeout: int = DEFAULT_OFFLINE_TIMEOUT
    check_interval: int = DEFAULT_CHECK_INTERVAL
    jitter: float = DEFAULT_JITTER


@dataclass(frozen=True)
class SyncConfig:
    publisher: int | None = None
    interval: int | None = None
    sizes: tuple[int, ...] = ()
    resync_bytes: int = DEFAULT_RESYNC_BYTES


@dataclass(frozen=True)
class FaultConfig:
    kind: str
    node: int
    at: int
    service: str | None = None
    every: int | None = None


@dataclass(frozen=True)
class OutputConfig:
    directory: str | None = None
    spike_factor: float | None = None
    trace_events: bool | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    seed: int
    duration: int
    nodes: tuple[NodeConfig, ...]
    radio: RadioParams = field(default_factory=RadioParams)
    propagation: PathLossModel = field(default_factory=PathLossModel)
    reception: ReceptionConfig = field(default_factory=ReceptionConfig)
    duty_cycle: DutyCycleConfig = field(default_factory=DutyCycleConfig)
    transport: TransportConfig = field(default_factory=TransportConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    metric_interval: int = DEFAULT_METRIC_INTERVAL
    metrics_payload_bytes: int = DEFAULT_PAYLOAD_BYTES
    metrics_buffer_limit: int = DEFAULT_BUFFER_LIMIT
    start_offsets: OffsetConfig = field(default_factory=OffsetConfig)
    layout: ServiceLayout | None = None
    ingest_service: str = INGEST_SERVICE
    sync: SyncConfig = field(default_factory=SyncConfig)
    faults: tuple[FaultConfig, ...] = ()
    outputs: OutputConfig = field(default_factory=OutputConfig)

    @property
    def node_ids(self) -> list[int]:
        return [n.id for n in self.nodes]

    def reporters(self) -> list[int]:
        return [n.id for n in self.nodes if n.reports_metrics]

    def offsets(self) -> dict[int, int]:
        return self.start_offsets.resolve(self.reporters(), self.metric_interval)

    def node(self, node_id: int) -> NodeConfig:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def with_overrides(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


# -- defaults ---------------------------------------------------------------


def default_position(index: int) -> tuple[float, float, float]:
    """Spread nodes over a 10 m x 6 m footprint on two floors."""
    return (5.0 * (index % 3), 6.0 * (index // 3 % 3), 3.0 * (index % 2))


def default_layout(node_ids: list[int]) -> ServiceLayout:
    """Ingestor on the second node, dashboard on the first, two fallbacks each."""
    ids = sorted(node_ids)
    if len(ids) < 2:
        raise LayoutError("a default layout needs at least two nodes")
    ingest_fallbacks = (ids[2:] + ids[:1])[:2]
    dash_fallbacks = (ids[3:] + ids[2:3] + ids[1:2])[:2]
    return ServiceLayout(
        services={
            "influxdb": ServiceSpec("influxdb", 339.0),
            "grafana": ServiceSpec("grafana", 8.83),
        },
        placements={
            "influxdb": Placement(ids[1], tuple(ingest_fallbacks)),
            "grafana": Placement(ids[0], tuple(dash_fallbacks)),
        },
    )


# -- YAML with line numbers -------------------------------------------------


@dataclass
class _Doc:
    value: Any  # dict[str, _Doc] | list[_Doc] | scalar
    line: int


def _compose(text: str) -> _Doc | None:
    loader = yaml.SafeLoader(text)
    try:
        root = loader.get_single_node()
        if root is None:
            return None
        return _wrap(loader, root)
    finally:
        loader.dispose()


def _wrap(loader: yaml.SafeLoader, node: yaml.Node) -> _Doc:
    line = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out: dict[Any, _Doc] = {}
        for key_node, value_node in node.value:
            key = loader.construct_object(key_node, deep=True)
            if key in out:
                raise ScenarioError(f"duplicate key '{key}'", key_node.start_mark.line + 1)
            out[key] = _wrap(loader, value_node)
        return _Doc(out, line)
    if isinstance(node, yaml.SequenceNode):
        return _Doc([_wrap(loader, item) for item in node.value], line)
    return _Doc(loader.construct_object(node, deep=True), line)


def _plain(doc: _Doc) -> Any:
    """Strip line tracking so converters see ordinary Python values."""
    if isinstance(doc.value, dict):
        return {k: _plain(v) for k, v in doc.value.items()}
    if isinstance(doc.value, list):
        return [_plain(v) for v in doc.value]
    return doc.value


class _Section:
    """Typed accessors over one YAML mapping, tracking which keys were used."""

    def __init__(self, doc: _Doc | None, where: str, strict: bool, source: str | None):
        if doc is not None and not isinstance(doc.value, dict):
            raise ScenarioError(f"'{where}' must be a mapping", doc.line, source)
        self.doc = doc
        self.items: dict[Any, _Doc] = doc.value if doc is not None else {}
        self.where = where
        self.strict = strict
        self.source = source
        self._used: set[Any] = set()

    def error(self, message: str, key: Any = None) -> ScenarioError:
        line = self.items[key].line if key in self.items else (self.doc.line if self.doc else None)
        return ScenarioError(message, line, self.source)

    def raw(self, key: str) -> _Doc | None:
        self._used.add(key)
        return self.items.get(key)

    def has(self, key: str) -> bool:
        return key in self.items

    def section(self, key: str) -> "_Section":
        return _Section(self.raw(key), f"{self.where}.{key}" if self.where else key, self.strict, self.source)

    def get(self, key: str, default: Any, convert=None, check=None, expect: str = "") -> Any:
        doc = self.raw(key)
        if doc is None:
            return default
        plain = _plain(doc)
        try:
            value = convert(plain) if convert is not None else plain
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"{self.where}.{key}: {e}", doc.line, self.source) from None
        if check is not None and not check(value):
            raise ScenarioError(f"{self.where}.{key}: {expect or 'invalid value'}, got {plain!r}", doc.line, self.source)
        return value

    def finish(self) -> None:
        unknown = [k for k in self.items if k not in self._used]
        if unknown and self.strict:
            key = unknown[0]
            raise ScenarioError(
                f"unknown key '{key}' in {self.where or 'scenario'}", self.items[key].line, self.source
            )
        for key in unknown:
            logger.warning(f"[scenario] ignoring unknown key '{key}' in {self.where or 'scenario'}")


def _int(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"expected an integer, got {value!r}")
    return value


def _number(value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"expected a number, got {value!r}")
    return float(value)


def _bool(value: Any) -> bool:
    if not isinstance(value, bool):
        raise ValueError(f"expected true/false, got {value!r}")
    return value


def _coding_rate(value: Any) -> int:
    if isinstance(value, str) and value.startswith("4/"):
        value = value[2:]
        return int(value) if value.isdigit() else _int(value)
    return _int(value)


def _fraction(value: Any) -> Fraction:
    if isinstance(value, str):
        return Fraction(value)
    return Fraction(_number(value)).limit_denominator(1_000_000)


# -- sections ---------------------------------------------------------------


def _parse_nodes(doc: _Doc | None, strict: bool, source: str | None) -> tuple[NodeConfig, ...]:
    if doc is None or not isinstance(doc.value, list) or not doc.value:
        raise ScenarioError("'nodes' must be a non-empty list", doc.line if doc else None, source)
    nodes = []
    seen: set[int] = set()
    for index, item in enumerate(doc.value):
        sec = _Section(item, f"nodes[{index}]", strict, source)
        if not sec.has("id"):
            raise sec.error("node needs an 'id'")
        node_id = sec.get("id", None, _int, lambda v: 0 <= v <= 254, "id must be 0..254")
        if node_id in seen:
            raise sec.error(f"node id {node_id} defined twice", "id")
        seen.add(node_id)

        def _position(value: Any) -> tuple[float, float, float]:
            if not isinstance(value, list) or len(value) not in (2, 3):
                raise ValueError("position must be [x, y] or [x, y, z] in metres")
            coords = [_number(v) for v in value]
            return (coords[0], coords[1], coords[2] if len(coords) == 3 else 0.0)

        position = sec.get("position", default_position(index), _position)
        reports = sec.get("reports_metrics", True, _bool)
        load_sec = sec.section("load")
        load = LoadModel(
            cpu_baseline=load_sec.get("cpu", 25.0, _number, lambda v: 0 <= v <= 100, "must be 0..100"),
            memory_baseline=load_sec.get("memory", 40.0, _number, lambda v: 0 <= v <= 100, "must be 0..100"),
            noise=load_sec.get("noise", 10.0, _number, lambda v: v >= 0, "must be >= 0"),
        )
        load_sec.finish()
        sec.finish()
        nodes.append(NodeConfig(node_id, position, reports, load))
    positions = [n.position for n in nodes]
    if len(set(positions)) != len(positions):
        raise ScenarioError("two nodes share a position", doc.line, source)
    return tuple(nodes)


def _parse_radio(sec: _Section) -> RadioParams:
    defaults = RadioParams()
    try:
        params = RadioParams(
            spreading_factor=sec.get("spreading_factor", defaults.spreading_factor, _int),
            bandwidth_hz=sec.get("bandwidth", defaults.bandwidth_hz, _int),
            coding_rate_denominator=sec.get("coding_rate", defaults.coding_rate_denominator, _coding_rate),
            tx_power_dbm=sec.get("tx_power_dbm", defaults.tx_power_dbm, _int),
            frequency_hz=sec.get("frequency_hz", defaults.frequency_hz, _int),
            preamble_symbols=sec.get("preamble_symbols", defaults.preamble_symbols, _int),
            explicit_header=sec.get("explicit_header", defaults.explicit_header, _bool),
            crc_enabled=sec.get("crc", defaults.crc_enabled, _bool),
            low_data_rate_optimize=sec.get("low_data_rate_optimize", False, _bool),
        )
    except RadioError as e:
        raise sec.error(str(e)) from None
    sec.finish()
    return params


def _parse_services(
    sec: _Section, node_ids: list[int], strict: bool, source: str | None
) -> ServiceLayout:
    services: dict[str, ServiceSpec] = {}
    placements: dict[str, Placement] = {}
    for name in list(sec.items):
        svc = sec.section(name)
        try:
            st = svc.section("start_time")
            model = StartTimeModel(
                kind=st.get("model", "empirical", str),
                value_s=st.get("value", 1.0, _number),
                low_s=st.get("low", 0.85, _number),
                high_s=st.get("high", 1.53, _number),
            )
            st.finish()
            services[name] = ServiceSpec(name, svc.get("image_size_mb", 100.0, _number), model)
        except LayoutError as e:
            raise svc.error(str(e)) from None
        if not svc.has("primary"):
            raise svc.error(f"service '{name}' needs a 'primary' node")
        primary = svc.get("primary", None, _int)

        def _fallbacks(value: Any) -> tuple[int, ...]:
            if not isinstance(value, list):
                raise ValueError("fallbacks must be a list of node ids")
            return tuple(_int(v) for v in value)

        placements[name] = Placement(primary, svc.get("fallbacks", (), _fallbacks))
        svc.finish()
    layout = ServiceLayout(services, placements)
    try:
        layout.validate(node_ids)
    except LayoutError as e:
        raise sec.error(str(e)) from None
    return layout


def _parse_offsets(sec: _Section, node_ids: list[int]) -> OffsetConfig:
    mode = sec.get("mode", "staggered", str, lambda v: v in OFFSET_MODES, f"must be one of {OFFSET_MODES}")
    explicit: dict[int, int] = {}
    values = sec.section("offsets")
    for key in list(values.items):
        if key not in node_ids:
            raise values.error(f"offset for undefined node {key}", key)
        explicit[key] = values.get(key, 0, parse_duration)
    if explicit and mode != "explicit":
        raise values.error("per-node offsets need mode: explicit")
    sec.finish()
    return OffsetConfig(mode, explicit)


def _parse_faults(
    doc: _Doc | None, node_ids: list[int], services: list[str], strict: bool, source: str | None
) -> tuple[FaultConfig, ...]:
    if doc is None:
        return ()
    if not isinstance(doc.value, list):
        raise ScenarioError("'faults' must be a list", doc.line, source)
    faults = []
    for index, item in enumerate(doc.value):
        sec = _Section(item, f"faults[{index}]", strict, source)
        kind = sec.get("kind", None, str, lambda v: v in FAULT_KINDS, f"must be one of {FAULT_KINDS}")
        if kind is None:
            raise sec.error("fault needs a 'kind'")
        node = sec.get("node", None, _int, lambda v: v in node_ids, "node is not defined")
        if node is None:
            raise sec.error("fault needs a 'node'")
        at = sec.get("at", None, parse_duration, lambda v: v >= 0, "must be >= 0")
        if at is None:
            raise sec.error("fault needs an 'at' time")
        service = sec.get("service", None, str)
        if kind == "kill_service":
            if service is None:
                raise sec.error("kill_service needs a 'service'")
            if service not in services:
                raise sec.error(f"unknown service '{service}'", "service")
        elif service is not None:
            raise sec.error(f"{kind} takes no 'service'", "service")
        every = sec.get("every", None, parse_duration, lambda v: v > 0, "must be > 0")
        sec.finish()
        faults.append(FaultConfig(kind, node, at, service, every))
    return tuple(sorted(faults, key=lambda f: (f.at, f.node, f.kind)))


def build_scenario(
    doc: _Doc | None,
    strict: bool = True,
    source: str | None = None,
    default_seed: int = 1,
) -> ScenarioConfig:
    if doc is None:
        raise ScenarioError("scenario file is empty", None, source)
    root = _Section(doc, "", strict, source)

    nodes = _parse_nodes(root.raw("nodes"), strict, source)
    node_ids = [n.id for n in nodes]

    name = root.get("name", Path(source).stem if source else "scenario", str)
    seed = root.get("seed", default_seed, _int, lambda v: v >= 0, "must be >= 0")
    duration = root.get("duration", 6 * US_PER_HOUR, parse_duration, lambda v: v > 0, "must be > 0")
    interval = root.get("metric_interval", DEFAULT_METRIC_INTERVAL, parse_duration, lambda v: v > 0, "must be > 0")
    payload_bytes = root.get("metrics_payload_bytes", DEFAULT_PAYLOAD_BYTES, _int, lambda v: v >= 0, "must be >= 0")
    buffer_limit = root.get("metrics_buffer_limit", DEFAULT_BUFFER_LIMIT, _int, lambda v: v >= 1, "must be >= 1")

    radio = _parse_radio(root.section("radio"))

    prop = root.section("propagation")
    propagation = PathLossModel(
        exponent=prop.get("path_loss_exponent", 2.7, _number, lambda v: v > 0, "must be > 0"),
        reference_loss_db=prop.get("reference_loss_db", 40.0, _number),
        reference_distance_m=prop.get("reference_distance_m", 1.0, _number, lambda v: v > 0, "must be > 0"),
        shadowing_sigma_db=prop.get("shadowing_sigma_db", 3.0, _number, lambda v: v >= 0, "must be >= 0"),
    )
    prop.finish()

    rx = root.section("reception")
    reception = ReceptionConfig(
        capture=rx.get("capture", True, _bool),
        capture_margin_db=rx.get("capture_margin_db", 6.0, _number, lambda v: v >= 0, "must be >= 0"),
        frame_loss_rate=rx.get("frame_loss_rate", 0.0, _number, lambda v: 0 <= v < 1, "must be in [0, 1)"),
    )
    rx.finish()

    dc = root.section("duty_cycle")
    duty = DutyCycleConfig(
        budget=dc.get("budget", Fraction(1, 100), _fraction, lambda v: 0 < v <= 1, "must be in (0, 1]"),
        window=dc.get("window", US_PER_HOUR, parse_duration, lambda v: v > 0, "must be > 0"),
        policy=dc.get("policy", "window", str, lambda v: v in POLICIES, f"must be one of {POLICIES}"),
    )
    dc.finish()

    tr = root.section("transport")
    transport = TransportConfig(
        max_retries=tr.get("max_retries", DEFAULT_MAX_RETRIES, _int, lambda v: v >= 0, "must be >= 0"),
        idle_timeout=tr.get("idle_timeout", DEFAULT_IDLE_TIMEOUT, parse_duration, lambda v: v > 0, "must be > 0"),
    )
    tr.finish()

    cl = root.section("cluster")
    cluster = ClusterConfig(
        heartbeat_interval=cl.get("heartbeat_interval", DEFAULT_HEARTBEAT_INTERVAL, parse_duration, lambda v: v > 0, "must be > 0"),
        offline_timeout=cl.get("offline_timeout", DEFAULT_OFFLINE_TIMEOUT, parse_duration, lambda v: v > 0, "must be > 0"),
        check_interval=cl.get("check_interval", DEFAULT_CHECK_INTERVAL, parse_duration, lambda v: v > 0, "must be > 0"),
        jitter=cl.get("jitter", DEFAULT_JITTER, _number, lambda v: 0 <= v < 1, "must be in [0, 1)"),
    )
    if cluster.offline_timeout <= cluster.heartbeat_interval * (1 + cluster.jitter):
        raise cl.error("offline_timeout must exceed the longest heartbeat gap", "offline_timeout")
    cl.finish()

    if root.has("services"):
        services_sec = root.section("services")
        layout = _parse_services(services_sec, node_ids, strict, source)
        services_sec.finish()
    else:
        layout = default_layout(node_ids) if len(node_ids) >= 2 else None
    service_names = sorted(layout.services) if layout else []
    ingest_service = root.get("ingest_service", INGEST_SERVICE, str)
    if layout is not None and ingest_service not in layout.services:
        raise root.error(f"ingest service '{ingest_service}' is not in the layout", "ingest_service")

    offsets_sec = root.section("start_offsets")
    offsets = _parse_offsets(offsets_sec, node_ids)

    sy = root.section("sync")

    def _sizes(value: Any) -> tuple[int, ...]:
        if not isinstance(value, list) or not value:
            raise ValueError("sizes must be a non-empty list of byte counts")
        return tuple(_int(v) for v in value)

    sync = SyncConfig(
        publisher=sy.get("publisher", None, _int, lambda v: v in node_ids, "node is not defined"),
        interval=sy.get("interval", None, parse_duration, lambda v: v > 0, "must be > 0"),
        sizes=sy.get("sizes", (), _sizes),
        resync_bytes=sy.get("resync_bytes", DEFAULT_RESYNC_BYTES, _int, lambda v: v >= 0, "must be >= 0"),
    )
    if sync.publisher is not None and (sync.interval is None or not sync.sizes):
        raise sy.error("sync with a publisher needs 'interval' and 'sizes'")
    sy.finish()

    faults = _parse_faults(root.raw("faults"), node_ids, service_names, strict, source)

    out = root.section("outputs")
    outputs = OutputConfig(
        directory=out.get("dir", None, str),
        spike_factor=out.get("spike_factor", None, _number, lambda v: v > 1, "must be > 1"),
        trace_events=out.get("trace_events", None, _bool),
    )
    out.finish()
    root.finish()

    config = ScenarioConfig(
        name=name,
        seed=seed,
        duration=duration,
        nodes=nodes,
        radio=radio,
        propagation=propagation,
        reception=reception,
        duty_cycle=duty,
        transport=transport,
        cluster=cluster,
        metric_interval=interval,
        metrics_payload_bytes=payload_bytes,
        metrics_buffer_limit=buffer_limit,
        start_offsets=offsets,
        layout=layout,
        ingest_service=ingest_service,
        sync=sync,
        faults=faults,
        outputs=outputs,
    )
    validate_scenario(config, offsets_sec)
    return config


def validate_scenario(config: ScenarioConfig, offsets_sec: _Section | None = None) -> None:
    """Cross-field checks that hold for parsed files and for presets alike."""
    if config.duration <= 0:
        raise ScenarioError("duration must be positive")
    for node, offset in config.offsets().items():
        if not 0 <= offset < config.metric_interval:
            message = (
                f"start offset {offset / US_PER_S:g}s of node {node} is not below "
                f"the metric interval {config.metric_interval / US_PER_S:g}s"
            )
            if offsets_sec is not None:
                offsets = offsets_sec.section("offsets")
                raise offsets.error(message, node)
            raise ScenarioError(message)


def parse_scenario_text(
    text: str, strict: bool = True, source: str | None = None, default_seed: int = 1
) -> ScenarioConfig:
    try:
        doc = _compose(text)
    except yaml.MarkedYAMLError as e:
        line = e.problem_mark.line + 1 if e.problem_mark is not None else None
        raise ScenarioError(f"invalid YAML: {e.problem}", line, source) from None
    except yaml.YAMLError as e:
        raise ScenarioError(f"invalid YAML: {e}", None, source) from None
    except ScenarioError as e:
        if e.source is None and source is not None:
            raise ScenarioError(e.message, e.line, source) from None
        raise
    return build_scenario(doc, strict, source, default_seed)


def parse_scenario(path: str | Path, strict: bool = True, default_seed: int = 1) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"cannot read scenario: {e.strerror}", None, str(path)) from None
    return parse_scenario_text(text, strict, str(path), default_seed)
