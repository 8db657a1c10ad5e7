import logging
from collections import deque
from dataclasses import dataclass
from typing import TYPE_CHECKING

from src.protocol.frame import FrameKind
from src.protocol.transport import OutboundTransfer, ReliableTransport, TransferError
from src.sim.kernel import US_PER_MIN, US_PER_S, EventHandle, Simulator

from .ingestor import TimeSeriesStore
from .models import DEFAULT_PAYLOAD_BYTES, MAX_HOPS, MetricsError, MetricsLedger, MetricsPacket

if TYPE_CHECKING:
    from src.cluster.failover import FailoverManager

logger = logging.getLogger("loraheal")

DEFAULT_METRIC_INTERVAL = 5 * US_PER_MIN
DEFAULT_BUFFER_LIMIT = 32
FLUSH_INTERVAL = 5 * US_PER_S
INGEST_SERVICE = "influxdb"


@dataclass(frozen=True)
class LoadModel:
    cpu_baseline: float = 25.0
    memory_baseline: float = 40.0
    noise: float = 10.0  # ± uniform spread in percentage points


class MetricsCollector:
    """Samples one node's gauges and moves packets toward the ingestor.

    Packets go straight into the store when this node hosts the ingestor,
    otherwise to the host in this node's current view, otherwise into a
    bounded buffer until a host is known again.
    """

    def __init__(
        self,
        sim: Simulator,
        node: int,
        transport: ReliableTransport,
        failover: "FailoverManager",
        store: TimeSeriesStore,
        ledger: MetricsLedger,
        interval: int = DEFAULT_METRIC_INTERVAL,
        offset: int = 0,
        load: LoadModel = LoadModel(),
        payload_bytes: int = DEFAULT_PAYLOAD_BYTES,
        buffer_limit: int = DEFAULT_BUFFER_LIMIT,
        reporting: bool = True,
        ingest_service: str = INGEST_SERVICE,
    ):
        self.sim = sim
        self.node = node
        self.transport = transport
        self.failover = failover
        self.store = store
        self.ledger = ledger
        self.interval = interval
        self.offset = offset
        self.load = load
        self.payload_bytes = payload_bytes
        self.buffer_limit = buffer_limit
        self.reporting = reporting
        self.ingest_service = ingest_service

        self.alive = False
        self._sequence = 0
        self._buffer: deque[MetricsPacket] = deque()
        self._sample_timer: EventHandle | None = None
        self._flush_timer: EventHandle | None = None
        self.forwarded = 0
        self.buffer_drops = 0

    @property
    def buffered(self) -> int:
        return len(self._buffer)

    def start(self, t: int) -> None:
        """Begin sampling at the first interval boundary plus this node's offset."""
        self.alive = True
        if not self.reporting:
            return
        first = (t - self.offset + self.interval - 1) // self.interval * self.interval + self.offset
        self._sample_timer = self.sim.schedule(
            max(first, t), self._on_sample_timer, target=self.node, label="sample"
        )

    def shutdown(self) -> None:
        self.alive = False
        self.sim.cancel(self._sample_timer)
        self.sim.cancel(self._flush_timer)
        self._flush_timer = None
        while self._buffer:
            self.ledger.lost(self._buffer.popleft().key)

    def _on_sample_timer(self) -> None:
        if not self.alive:
            return
        packet = self.sample_metrics(self.sim.now)
        self.forward_or_ingest(packet, self.sim.now)
        self._sample_timer = self.sim.schedule_in(
            self.interval, self._on_sample_timer, target=self.node, label="sample"
        )

    def sample_metrics(self, t: int) -> MetricsPacket:
        rng = self.sim.rng("load")
        cpu = self.load.cpu_baseline + rng.uniform(-self.load.noise, self.load.noise)
        mem = self.load.memory_baseline + rng.uniform(-self.load.noise, self.load.noise)
        packet = MetricsPacket(
            source=self.node,
            sequence=self._sequence,
            origin_timestamp=t,
            cpu_percent=round(min(max(float(cpu), 0.0), 100.0), 2),
            memory_percent=round(min(max(float(mem), 0.0), 100.0), 2),
            running_services=sorted(self.failover.running),
        )
        self._sequence += 1
        self.ledger.sampled(packet.key)
        return packet

    # -- routing ------------------------------------------------------------

    def forward_or_ingest(self, packet: MetricsPacket, t: int) -> str:
        """Returns the action taken: ingested, forwarded, buffered or dropped."""
        if self.failover.runs(self.ingest_service):
            self.ingest(packet, t)
            return "ingested"
        host = self.failover.host_of(self.ingest_service)
        if host is None:
            self._buffer_packet(packet)
            return "buffered"
        if packet.hops >= MAX_HOPS:
            logger.warning(f"[metrics n{self.node}] n{packet.source}#{packet.sequence} hop limit reached")
            self.ledger.lost(packet.key)
            return "dropped"
        self._send(packet, host, t)
        return "forwarded"

    def ingest(self, packet: MetricsPacket, t: int):
        record = self.store.ingest(packet, t, self.node)
        if record is not None:
            self.ledger.ingested(packet.key)
            logger.debug(
                f"[metrics n{self.node}] ingested n{packet.source}#{packet.sequence} "
                f"latency {record.latency / 1e6:.2f}s"
            )
        return record

    def _send(self, packet: MetricsPacket, host: int, t: int) -> None:
        outgoing = packet if packet.source == self.node and packet.hops == 0 else packet.forwarded()
        if outgoing is not packet:
            self.forwarded += 1
        payload = outgoing.encode(self.payload_bytes)
        key = packet.key

        def on_failed(transfer: OutboundTransfer, when: int) -> None:
            self.ledger.lost(key)

        try:
            self.transport.send_reliable(
                host, FrameKind.METRICS_DATA, payload, t, on_failed=on_failed
            )
        except TransferError as e:
            logger.error(f"[metrics n{self.node}] cannot send n{key[0]}#{key[1]}: {e}")
            self.ledger.lost(key)

    def on_metrics(self, source: int, payload: bytes, t: int) -> None:
        if not self.alive:
            return
        try:
            packet = MetricsPacket.decode(payload)
        except MetricsError as e:
            logger.warning(f"[metrics n{self.node}] packet from n{source} dropped: {e}")
            return
        self.forward_or_ingest(packet, t)

    # -- buffering ----------------------------------------------------------

    def _buffer_packet(self, packet: MetricsPacket) -> None:
        if len(self._buffer) >= self.buffer_limit:
            oldest = self._buffer.popleft()
            self.buffer_drops += 1
            self.ledger.lost(oldest.key)
            logger.warning(
                f"[metrics n{self.node}] buffer full, dropped n{oldest.source}#{oldest.sequence}"
            )
        self._buffer.append(packet)
        if self._flush_timer is None or not self._flush_timer.active:
            self._flush_timer = self.sim.schedule_in(
                FLUSH_INTERVAL, self._flush, target=self.node, label="metrics_flush"
            )

    def _flush(self) -> None:
        self._flush_timer = None
        if not self.alive or not self._buffer:
            return
        if not self.failover.runs(self.ingest_service) and self.failover.host_of(self.ingest_service) is None:
            self._flush_timer = self.sim.schedule_in(
                FLUSH_INTERVAL, self._flush, target=self.node, label="metrics_flush"
            )
            return
        pending = list(self._buffer)
        self._buffer.clear()
        logger.info(f"[metrics n{self.node}] ingestor reachable again, flushing {len(pending)} packets")
        for packet in pending:
            self.forward_or_ingest(packet, self.sim.now)
