import logging
from typing import Callable

from src.cluster.failover import PROBE_PREFIX, FailoverManager
from src.cluster.registry import ServiceRegistry
from src.core.models import BundleRecord, FailoverRecord, TransmissionRecord
from src.metrics.collector import MetricsCollector
from src.metrics.git_sync import GitSyncManager
from src.metrics.ingestor import TimeSeriesStore
from src.metrics.models import MetricsLedger
from src.protocol.frame import FrameKind
from src.protocol.transport import ReliableTransport
from src.radio.medium import RadioMedium
from src.sim.kernel import Simulator

from .config import NodeConfig, ScenarioConfig

logger = logging.getLogger("loraheal")


class EdgeNode:
    """One simulated board: radio transport, failover controller, metrics
    collector and file sync, wired to the shared medium."""

    def __init__(
        self,
        sim: Simulator,
        spec: NodeConfig,
        config: ScenarioConfig,
        medium: RadioMedium,
        registry: ServiceRegistry,
        store: TimeSeriesStore,
        ledger: MetricsLedger,
        journal: dict[tuple[str, int], BundleRecord],
        on_failover: Callable[[FailoverRecord], None] | None = None,
    ):
        self.sim = sim
        self.id = spec.id
        self.spec = spec
        self.medium = medium
        self.alive = False
        peers = config.node_ids

        self.transport = ReliableTransport(
            sim,
            medium,
            self.id,
            on_deliver=self._deliver,
            max_retries=config.transport.max_retries,
            idle_timeout=config.transport.idle_timeout,
        )
        self.failover = FailoverManager(
            sim,
            self.id,
            peers,
            config.layout,
            registry,
            self.transport,
            heartbeat_interval=config.cluster.heartbeat_interval,
            offline_timeout=config.cluster.offline_timeout,
            check_interval=config.cluster.check_interval,
            jitter=config.cluster.jitter,
            on_record=on_failover,
        )
        self.transport.on_frame_heard = self.failover.observe
        self.collector = MetricsCollector(
            sim,
            self.id,
            self.transport,
            self.failover,
            store,
            ledger,
            interval=config.metric_interval,
            offset=config.offsets().get(self.id, 0),
            load=spec.load,
            payload_bytes=config.metrics_payload_bytes,
            buffer_limit=config.metrics_buffer_limit,
            reporting=spec.reports_metrics,
            ingest_service=config.ingest_service,
        )
        self.sync = GitSyncManager(
            sim,
            self.id,
            peers,
            self.transport,
            journal,
            publisher=config.sync.publisher,
            bundle_interval=config.sync.interval,
            bundle_sizes=config.sync.sizes,
            resync_bytes=config.sync.resync_bytes,
        )
        medium.attach(self.id, self._on_radio)
        medium.set_listening(self.id, False)

    def _on_radio(self, wire: bytes, rec: TransmissionRecord, rssi: float) -> None:
        if self.alive:
            self.transport.handle_wire(wire, self.sim.now)

    def _deliver(self, kind: FrameKind, source: int, payload: bytes, t: int) -> None:
        if kind is FrameKind.HEARTBEAT:
            self.failover.on_heartbeat(source, payload, t)
        elif kind is FrameKind.METRICS_DATA:
            self.collector.on_metrics(source, payload, t)
        elif kind is FrameKind.BUNDLE_DATA:
            self.sync.on_bundle(source, payload, t)
        elif payload.startswith(PROBE_PREFIX):
            self.failover.on_probe(source, payload, t)
        else:
            self.sync.on_data(source, payload, t)

    def boot(self, t: int, services: list[str], first_heartbeat_at: int) -> None:
        self.alive = True
        self.medium.set_listening(self.id, True)
        self.transport.restart()
        self.failover.boot(t, services, first_heartbeat_at)
        self.collector.start(t)
        self.sync.start(t)

    def kill(self, t: int) -> None:
        if not self.alive:
            return
        self.alive = False
        self.medium.set_listening(self.id, False)
        self.collector.shutdown()
        self.transport.shutdown()
        self.failover.shutdown(t)
        self.sync.shutdown()
        logger.info(f"[scenario] node {self.id} killed")

    def revive(self, t: int, first_heartbeat_at: int) -> None:
        """Power back on with no services; relocated services stay where they are."""
        if self.alive:
            return
        self.boot(t, [], first_heartbeat_at)
        logger.info(f"[scenario] node {self.id} revived")
