from typing import Callable

from src.cluster.models import Placement, ServiceLayout, ServiceSpec, StartTimeModel
from src.radio.params import RadioParams
from src.sim.kernel import US_PER_HOUR, US_PER_MIN

from .config import (
    DutyCycleConfig,
    FaultConfig,
    NodeConfig,
    OffsetConfig,
    ScenarioConfig,
    ScenarioError,
    SyncConfig,
    default_layout,
    default_position,
    validate_scenario,
)

NODE_IDS = (1, 2, 3, 4, 5)
INGESTOR = 2
PRESET_DURATION = 6 * US_PER_HOUR


def _nodes(ingestor_reports: bool) -> tuple[NodeConfig, ...]:
    return tuple(
        NodeConfig(node, default_position(i), reports_metrics=ingestor_reports or node != INGESTOR)
        for i, node in enumerate(NODE_IDS)
    )


def baseline_4_node(seed: int) -> ScenarioConfig:
    """Four reporting nodes plus the ingestor, staggered starts, 5-min interval."""
    return ScenarioConfig(
        name="baseline-4-node",
        seed=seed,
        duration=PRESET_DURATION,
        nodes=_nodes(ingestor_reports=False),
        layout=default_layout(list(NODE_IDS)),
        start_offsets=OffsetConfig("staggered"),
    )


def baseline_5_node(seed: int) -> ScenarioConfig:
    """All five nodes report; the ingestor stores its own packets directly."""
    return baseline_4_node(seed).with_overrides(name="baseline-5-node", nodes=_nodes(ingestor_reports=True))


def sync_start_4_node(seed: int) -> ScenarioConfig:
    return baseline_4_node(seed).with_overrides(
        name="sync-start-4-node", start_offsets=OffsetConfig("synchronized")
    )


def interval_10min(seed: int) -> ScenarioConfig:
    return baseline_4_node(seed).with_overrides(name="interval-10min", metric_interval=10 * US_PER_MIN)


def bw_500k(seed: int) -> ScenarioConfig:
    return baseline_4_node(seed).with_overrides(name="bw-500k", radio=RadioParams(bandwidth_hz=500_000))


def cr_4_8(seed: int) -> ScenarioConfig:
    return baseline_4_node(seed).with_overrides(name="cr-4-8", radio=RadioParams(coding_rate_denominator=8))


def power_5dbm(seed: int) -> ScenarioConfig:
    return baseline_4_node(seed).with_overrides(name="power-5dbm", radio=RadioParams(tx_power_dbm=5))


def failover_imagesize(seed: int) -> ScenarioConfig:
    """Repeated service kills across three image sizes, plus losing node 2 at 2 h."""
    empirical = StartTimeModel("empirical")
    layout = ServiceLayout(
        services={
            "grafana": ServiceSpec("grafana", 8.83, empirical),
            "influxdb": ServiceSpec("influxdb", 339.0, empirical),
            "jupyter": ServiceSpec("jupyter", 5470.0, empirical),
        },
        placements={
            "grafana": Placement(1, (4, 5)),
            "influxdb": Placement(2, (3, 4)),
            "jupyter": Placement(5, (1, 3)),
        },
    )
    every = 6 * US_PER_MIN
    faults = (
        FaultConfig("kill_service", 1, 5 * US_PER_MIN, "grafana", every),
        FaultConfig("kill_service", 5, 7 * US_PER_MIN, "jupyter", every),
        FaultConfig("kill_service", 2, 9 * US_PER_MIN, "influxdb", every),
        FaultConfig("kill_node", 2, 2 * US_PER_HOUR),
    )
    return baseline_4_node(seed).with_overrides(name="failover-imagesize", layout=layout, faults=faults)


def bundle_sync(seed: int) -> ScenarioConfig:
    """Ingestor publishes hourly bundles; node 4 misses one and needs a resync."""
    faults = (
        FaultConfig("kill_node", 4, 90 * US_PER_MIN),
        FaultConfig("revive_node", 4, 150 * US_PER_MIN),
    )
    return baseline_4_node(seed).with_overrides(
        name="bundle-sync",
        sync=SyncConfig(publisher=INGESTOR, interval=US_PER_HOUR, sizes=(512, 1024, 2048), resync_bytes=2048),
        faults=faults,
    )


def backoff_4_node(seed: int) -> ScenarioConfig:
    """Per-frame silence of 99x airtime instead of the rolling hourly window."""
    return baseline_4_node(seed).with_overrides(
        name="backoff-4-node", duty_cycle=DutyCycleConfig(policy="backoff")
    )


PRESETS: dict[str, Callable[[int], ScenarioConfig]] = {
    "baseline-4-node": baseline_4_node,
    "baseline-5-node": baseline_5_node,
    "sync-start-4-node": sync_start_4_node,
    "interval-10min": interval_10min,
    "bw-500k": bw_500k,
    "cr-4-8": cr_4_8,
    "power-5dbm": power_5dbm,
    "failover-imagesize": failover_imagesize,
    "bundle-sync": bundle_sync,
    "backoff-4-node": backoff_4_node,
}

FAULT_PRESETS = ("failover-imagesize", "bundle-sync")


def load_preset(name: str, seed: int) -> ScenarioConfig:
    try:
        build = PRESETS[name]
    except KeyError:
        raise ScenarioError(f"unknown preset '{name}' (known: {', '.join(PRESETS)})") from None
    config = build(seed)
    config.layout.validate(config.node_ids)
    validate_scenario(config)
    return config
