import logging
from dataclasses import dataclass, field
from pathlib import Path

from src.cluster.models import ServiceLayout
from src.cluster.registry import OwnershipViolation, ServiceRegistry
from src.core.logger import bind_clock
from src.core.models import BundleRecord, FailoverRecord, LatencyRecord, TransmissionRecord
from src.metrics.ingestor import TimeSeriesStore
from src.metrics.models import MetricsLedger
from src.radio.medium import RadioMedium, ReceptionRules
from src.radio.propagation import LinkTable
from src.sim.kernel import GLOBAL, Simulator

from .config import FaultConfig, ScenarioConfig
from .export import write_run
from .node import EdgeNode
from .summary import RunSummary, summarize

logger = logging.getLogger("loraheal")


@dataclass
class RunResult:
    config: ScenarioConfig
    latencies: list[LatencyRecord]
    transmissions: list[TransmissionRecord]
    failovers: list[FailoverRecord]
    bundles: list[BundleRecord]
    ledger: MetricsLedger
    store: TimeSeriesStore
    registry: ServiceRegistry
    violations: list[OwnershipViolation]
    unplaced: list[str]
    file_versions: dict[int, str]
    alive_nodes: list[int]
    retransmissions: int
    counters: dict[str, int] = field(default_factory=dict)
    events: list[tuple[int, int, int, str]] = field(default_factory=list)


class ClusterSimulation:
    """Builds every node of a scenario on one shared medium and runs it."""

    def __init__(self, config: ScenarioConfig, trace: bool = False):
        self.config = config
        self.sim = Simulator(config.seed, trace=trace)
        self.layout = config.layout or ServiceLayout({}, {})
        config = config.with_overrides(layout=self.layout)

        links = LinkTable({n.id: n.to_position() for n in config.nodes}, config.propagation)
        links.freeze_shadowing(self.sim.rng("shadowing"))
        rules = ReceptionRules(
            capture_enabled=config.reception.capture,
            capture_margin_db=config.reception.capture_margin_db,
        )
        self.medium = RadioMedium(
            self.sim,
            config.radio,
            links,
            rules,
            frame_loss_rate=config.reception.frame_loss_rate,
            duty_window_us=config.duty_cycle.window,
            duty_budget=config.duty_cycle.budget,
            duty_policy=config.duty_cycle.policy,
        )
        self.registry = ServiceRegistry()
        self.store = TimeSeriesStore()
        self.ledger = MetricsLedger()
        self.journal: dict[tuple[str, int], BundleRecord] = {}
        self.failovers: list[FailoverRecord] = []
        self.nodes: dict[int, EdgeNode] = {
            spec.id: EdgeNode(
                self.sim,
                spec,
                config,
                self.medium,
                self.registry,
                self.store,
                self.ledger,
                self.journal,
                on_failover=self.failovers.append,
            )
            for spec in config.nodes
        }

    def _first_heartbeat(self, t: int) -> int:
        spread = self.sim.rng_draw("offsets")
        return t + int(spread * self.config.cluster.heartbeat_interval)

    def _schedule_fault(self, fault: FaultConfig) -> None:
        at = fault.at
        while at < self.config.duration:
            self.sim.schedule(at, self._apply_fault, fault, target=GLOBAL, label=fault.kind)
            if fault.every is None:
                break
            at += fault.every

    def _apply_fault(self, fault: FaultConfig) -> None:
        node = self.nodes[fault.node]
        t = self.sim.now
        if fault.kind == "kill_node":
            if not node.alive:
                logger.warning(f"[scenario] kill_node {fault.node}: already down")
            node.kill(t)
        elif fault.kind == "revive_node":
            if node.alive:
                logger.warning(f"[scenario] revive_node {fault.node}: already up")
            node.revive(t, self._first_heartbeat(t))
        elif not node.alive or not node.failover.kill_service(fault.service, t):
            logger.warning(f"[scenario] kill_service {fault.service} on n{fault.node}: not running there")

    def run(self) -> RunResult:
        config = self.config
        logger.info(
            f"[scenario] {config.name}: {len(self.nodes)} nodes, seed {config.seed}, "
            f"{config.duration / 3.6e9:.2f}h"
        )
        for node_id, node in self.nodes.items():
            node.boot(0, self.layout.initial_services(node_id), self._first_heartbeat(0))
        for fault in config.faults:
            self._schedule_fault(fault)

        bind_clock(lambda: self.sim.now)
        try:
            dispatched = self.sim.run_until(config.duration)
        finally:
            bind_clock(None)
        logger.info(f"[scenario] {config.name} finished after {dispatched} events")
        return self._collect(dispatched)

    def _collect(self, dispatched: int) -> RunResult:
        horizon = self.config.duration
        alive = [n for n, node in sorted(self.nodes.items()) if node.alive]
        unplaced = []
        for service in sorted(self.layout.services):
            placeable = any(n in alive for n in (self.layout.primary_of(service), *self.layout.fallbacks_of(service)))
            if placeable and not self.registry.hosts(service):
                unplaced.append(service)
        transports = [node.transport for node in self.nodes.values()]
        counters = {
            "events": dispatched,
            "collision_losses": self.medium.collision_losses,
            "half_duplex_misses": self.medium.half_duplex_misses,
            "random_losses": self.medium.random_losses,
            "transfers_completed": sum(t.transfers_completed for t in transports),
            "transfers_failed": sum(t.transfers_failed for t in transports),
            "nacks_sent": sum(t.nacks_sent for t in transports),
            "acks_sent": sum(t.acks_sent for t in transports),
            "protocol_errors": sum(t.protocol_errors for t in transports),
            "expired_messages": sum(t.expired_messages for t in transports),
            "deferrals": sum(t.gate.deferrals for t in transports),
            "duplicate_ingests": self.store.duplicates,
            "redeploys_aborted": sum(n.failover.redeploys_aborted for n in self.nodes.values()),
            "bundle_rejections": sum(n.sync.rejections for n in self.nodes.values()),
        }
        return RunResult(
            config=self.config,
            latencies=list(self.store.records),
            transmissions=list(self.medium.records),
            failovers=list(self.failovers),
            bundles=sorted(self.journal.values(), key=lambda r: (r.published_at, r.bundle_id, r.node)),
            ledger=self.ledger,
            store=self.store,
            registry=self.registry,
            violations=self.registry.violations(horizon),
            unplaced=unplaced,
            file_versions={n: node.sync.state.current_version for n, node in sorted(self.nodes.items())},
            alive_nodes=alive,
            retransmissions=sum(t.retransmissions for t in transports),
            counters=counters,
            events=list(self.sim.trace),
        )


def run_scenario(
    config: ScenarioConfig,
    out_dir: str | Path | None = None,
    spike_factor: float = 1.5,
    trace: bool = False,
) -> RunSummary:
    """Run one scenario to completion, writing every output file when
    ``out_dir`` is given."""
    result = ClusterSimulation(config, trace=trace).run()
    summary = summarize(result, spike_factor)
    if out_dir is not None:
        write_run(result, summary, Path(out_dir))
    return summary
