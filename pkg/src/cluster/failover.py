import logging
from dataclasses import dataclass, field
from typing import Callable

from src.core.models import FailoverRecord
from src.protocol.frame import BROADCAST, FrameKind
from src.protocol.transport import OutboundTransfer, ReliableTransport, TransferError
from src.sim.kernel import US_PER_S, EventHandle, Simulator

from .models import LivenessTable, ServiceLayout
from .registry import ServiceRegistry

logger = logging.getLogger("loraheal")

DEFAULT_HEARTBEAT_INTERVAL = 30 * US_PER_S
DEFAULT_OFFLINE_TIMEOUT = 90 * US_PER_S
DEFAULT_CHECK_INTERVAL = 5 * US_PER_S
DEFAULT_JITTER = 0.1
PROBE_PREFIX = b"PROBE "

# (service, fallbacks, offline node, liveness) -> chosen target or None
TargetPolicy = Callable[[str, tuple[int, ...], int, LivenessTable], int | None]


def first_alive_fallback(
    service: str, fallbacks: tuple[int, ...], offline_node: int, liveness: LivenessTable
) -> int | None:
    for node in fallbacks:
        if node != offline_node and liveness.is_alive(node):
            return node
    return None


@dataclass
class FailoverPlan:
    moves: list[tuple[str, int]] = field(default_factory=list)
    unplaceable: list[str] = field(default_factory=list)


def plan_failover(
    offline_node: int,
    layout: ServiceLayout,
    liveness: LivenessTable,
    placement: dict[str, int],
    policy: TargetPolicy = first_alive_fallback,
) -> FailoverPlan:
    """Targets for every service ``placement`` puts on ``offline_node``.

    Pure in its inputs: observers holding equal tables and placements get
    equal plans.
    """
    plan = FailoverPlan()
    for service in sorted(placement):
        if placement[service] != offline_node:
            continue
        target = policy(service, layout.fallbacks_of(service), offline_node, liveness)
        if target is None:
            plan.unplaceable.append(service)
        else:
            plan.moves.append((service, target))
    return plan


def encode_heartbeat(running: dict[str, int]) -> bytes:
    return ",".join(f"{s}@{e}" for s, e in sorted(running.items())).encode("ascii")


def decode_heartbeat(body: bytes) -> dict[str, int]:
    services = {}
    text = body.decode("ascii", errors="replace")
    for item in filter(None, text.split(",")):
        name, _, epoch = item.partition("@")
        if not name or not epoch.isdigit():
            raise ValueError(f"bad heartbeat item {item!r}")
        services[name] = int(epoch)
    return services


def _outranks(epoch_a: int, node_a: int, epoch_b: int, node_b: int) -> bool:
    """Higher epoch wins; on equal epochs the lower node id keeps the service."""
    return (epoch_a, -node_a) > (epoch_b, -node_b)


@dataclass
class PendingRedeploy:
    service: str
    from_node: int
    epoch: int
    outage_start: int
    detected_at: int
    start_time: int
    handle: EventHandle


class FailoverManager:
    """Per-node heartbeat emitter, failure detector and takeover executor.

    Each node watches its peers on its own. When a service's viewed host goes
    offline, the first alive node in the service's fallback list probes that
    host with a reliable unicast and starts the service only once the probe
    fails; an ACK means the host is still up and the takeover is dropped.
    Every other observer only updates its view.
    """

    def __init__(
        self,
        sim: Simulator,
        node: int,
        peers: list[int],
        layout: ServiceLayout,
        registry: ServiceRegistry,
        transport: ReliableTransport,
        heartbeat_interval: int = DEFAULT_HEARTBEAT_INTERVAL,
        offline_timeout: int = DEFAULT_OFFLINE_TIMEOUT,
        check_interval: int = DEFAULT_CHECK_INTERVAL,
        jitter: float = DEFAULT_JITTER,
        policy: TargetPolicy = first_alive_fallback,
        on_record: Callable[[FailoverRecord], None] | None = None,
    ):
        self.sim = sim
        self.node = node
        self.peers = sorted(p for p in peers if p != node)
        self.layout = layout
        self.registry = registry
        self.transport = transport
        self.heartbeat_interval = heartbeat_interval
        self.offline_timeout = offline_timeout
        self.check_interval = check_interval
        self.jitter = jitter
        self.policy = policy
        self.on_record = on_record

        self.alive = False
        self.liveness = LivenessTable(offline_timeout)
        self.running: dict[str, int] = {}  # service -> epoch
        self.view: dict[str, tuple[int, int]] = {}  # service -> (host, epoch)
        self.pending: dict[str, PendingRedeploy] = {}
        self.probing: dict[str, tuple[int, OutboundTransfer]] = {}  # service -> (silent host, probe)
        self.records: list[FailoverRecord] = []
        self.heartbeats_sent = 0
        self.redeploys_aborted = 0
        self.fenced = 0
        self._airings: list[int] = []  # start times of queued heartbeats, ascending
        self._booted_at = 0
        self._killed: dict[str, int] = {}  # locally killed service -> kill time
        self._vacant_since: dict[str, int] = {}
        self._unplaceable: set[str] = set()
        self._heartbeat_timer: EventHandle | None = None
        self._check_timer: EventHandle | None = None

    # -- lifecycle ----------------------------------------------------------

    def boot(self, t: int, services: list[str], first_heartbeat_at: int) -> None:
        """Power on with ``services`` already running (epoch 0) and no memory
        of anything else."""
        self.alive = True
        self.liveness = LivenessTable(self.offline_timeout)
        for peer in self.peers:
            self.liveness.track(peer, t)
        self.liveness.track(self.node, t)
        self.view = {s: (self.layout.primary_of(s), 0) for s in self.layout.services}
        self.running = {}
        for service in services:
            self.running[service] = 0
            self.registry.start(service, self.node, t)
        self._killed.clear()
        self._vacant_since.clear()
        self._unplaceable.clear()
        self._airings = []
        self._booted_at = t
        self._heartbeat_timer = self.sim.schedule(
            max(first_heartbeat_at, t), self.emit_heartbeat, target=self.node, label="heartbeat"
        )
        self._check_timer = self.sim.schedule(
            t + self.check_interval, self._periodic_check, target=self.node, label="liveness"
        )

    def shutdown(self, t: int) -> None:
        if not self.alive:
            return
        self.alive = False
        self.sim.cancel(self._heartbeat_timer)
        self.sim.cancel(self._check_timer)
        for pending in self.pending.values():
            self.sim.cancel(pending.handle)
            self.redeploys_aborted += 1
            logger.error(
                f"[failover n{self.node}] redeploy of {pending.service} aborted: node went down"
            )
        self.pending.clear()
        self.probing.clear()
        self.registry.stop_all(self.node, t)
        self.running.clear()

    def kill_service(self, service: str, t: int) -> bool:
        if service not in self.running:
            return False
        del self.running[service]
        self.registry.stop(service, self.node, t)
        self._killed[service] = t
        logger.info(f"[failover n{self.node}] {service} killed")
        return True

    # -- views --------------------------------------------------------------

    def runs(self, service: str) -> bool:
        return service in self.running

    def host_of(self, service: str) -> int | None:
        """Where this node believes ``service`` runs, None when that host is
        offline or known not to run it."""
        if service not in self.view:
            return None
        host, _ = self.view[service]
        if host == self.node:
            return host if service in self.running else None
        if not self.liveness.is_alive(host) or service in self._vacant_since:
            return None
        return host

    # -- heartbeats ---------------------------------------------------------

    def emit_heartbeat(self) -> None:
        if not self.alive:
            return
        self._send_heartbeat()
        spread = self.sim.rng("jitter").uniform(-self.jitter, self.jitter)
        delay = int(self.heartbeat_interval * (1 + spread))
        self._heartbeat_timer = self.sim.schedule_in(
            delay, self.emit_heartbeat, target=self.node, label="heartbeat"
        )

    def _send_heartbeat(self) -> None:
        start = self.transport.send_best_effort(
            BROADCAST, FrameKind.HEARTBEAT, encode_heartbeat(self.running), self.sim.now
        )
        if start is not None:
            self._airings.append(start)
        self.heartbeats_sent += 1

    def _last_aired(self, t: int) -> int:
        """Start of the newest heartbeat already on air at ``t`` (boot time before the first)."""
        while len(self._airings) > 1 and self._airings[1] <= t:
            self._airings.pop(0)
        if self._airings and self._airings[0] <= t:
            return self._airings[0]
        return self._booted_at

    def _fence(self, t: int) -> None:
        """Stop every local service once peers cannot have heard this node for
        a full offline timeout; a fallback may already be taking them over."""
        if not self.running or t - self._last_aired(t) <= self.offline_timeout:
            return
        for service in sorted(self.running):
            self.registry.stop(service, self.node, t)
            self.fenced += 1
            logger.error(f"[failover n{self.node}] {service} fenced: no heartbeat on air for too long")
        self.running.clear()

    def observe(self, source: int, t: int) -> None:
        """Any decoded frame from ``source`` proves it is up."""
        if not self.alive or source == self.node:
            return
        for service, (host, _) in list(self.probing.items()):
            if host == source:
                self._drop_probe(service, f"n{source} answered")
        if self.liveness.heartbeat(source, t):
            logger.info(f"[failover n{self.node}] node {source} is back online")
            for pending in list(self.pending.values()):
                if pending.from_node == source and pending.service not in self._vacant_since:
                    self._abort(pending, f"n{source} answered again")

    def on_heartbeat(self, source: int, body: bytes, t: int) -> None:
        if not self.alive:
            return
        try:
            services = decode_heartbeat(body)
        except ValueError as e:
            logger.warning(f"[failover n{self.node}] heartbeat from n{source} dropped: {e}")
            return
        self.observe(source, t)

        for service, epoch in services.items():
            if service not in self.layout.services:
                continue
            mine = self.running.get(service)
            if mine is not None and _outranks(epoch, source, mine, self.node):
                del self.running[service]
                self.registry.stop(service, self.node, t)
                logger.warning(
                    f"[failover n{self.node}] n{source} runs {service}@{epoch}, stopping local copy"
                )
            pending = self.pending.get(service)
            if pending is not None and (
                source == pending.from_node or _outranks(epoch, source, pending.epoch, self.node)
            ):
                self._abort(pending, f"n{source} still runs it")
            if service in self.probing:
                self._drop_probe(service, f"n{source} runs it")
            host, known = self.view[service]
            if host == self.node and service in self.running:
                continue
            if epoch > known or (epoch == known and _outranks(epoch, source, known, host)) or host == source:
                self.view[service] = (source, epoch)
                self._vacant_since.pop(service, None)

        for service, (host, _) in self.view.items():
            if host == source and service not in services:
                self._vacant_since.setdefault(service, t)

    # -- detection and takeover --------------------------------------------

    def _periodic_check(self) -> None:
        if not self.alive:
            return
        self.check_liveness(self.sim.now)
        self._check_timer = self.sim.schedule_in(
            self.check_interval, self._periodic_check, target=self.node, label="liveness"
        )

    def check_liveness(self, t: int) -> list[int]:
        """Advance the liveness table and act on every service whose host is gone."""
        self.liveness.heartbeat(self.node, t)
        self._fence(t)
        newly_offline = self.liveness.check(t)
        for node in newly_offline:
            logger.info(f"[failover n{self.node}] node {node} declared offline")

        for service in sorted(self._killed):
            if service in self.pending or service in self.running:
                continue
            self.execute_redeploy(service, self.node, t, outage_start=self._killed[service])

        orphans: dict[int, list[str]] = {}
        silent: set[str] = set()
        for service in sorted(self.layout.services):
            if service in self.running or service in self.pending or service in self.probing:
                continue
            if service in self._killed:
                continue
            host, _ = self.view[service]
            gone = host == self.node or not self.liveness.is_alive(host)
            vacant = t - self._vacant_since.get(service, t) > self.offline_timeout
            if gone or vacant:
                orphans.setdefault(host, []).append(service)
            if gone and host != self.node and service not in self._vacant_since:
                silent.add(service)

        for host, services in sorted(orphans.items()):
            placement = {s: host for s in services}
            plan = plan_failover(host, self.layout, self.liveness, placement, self.policy)
            for service in plan.unplaceable:
                if service not in self._unplaceable:
                    self._unplaceable.add(service)
                    logger.error(f"[failover n{self.node}] {service} unplaceable: no alive fallback")
            for service, target in plan.moves:
                self._unplaceable.discard(service)
                if target != self.node:
                    continue
                if service in silent:
                    self._probe_host(service, host, t)
                else:
                    self.execute_redeploy(service, host, t)
        return newly_offline

    def _probe_host(self, service: str, host: int, t: int) -> None:
        """Reach the silent host directly before starting a second copy."""

        def on_answer(transfer: OutboundTransfer, when: int) -> None:
            if self.probing.get(service, (None, None))[1] is transfer:
                self._drop_probe(service, f"n{host} acknowledged the probe")

        def on_silence(transfer: OutboundTransfer, when: int) -> None:
            if self.probing.get(service, (None, None))[1] is not transfer:
                return
            del self.probing[service]
            if self.alive and self.transport.alive:
                self.execute_redeploy(service, host, when)

        try:
            probe = self.transport.send_reliable(
                host, FrameKind.DATA, PROBE_PREFIX + service.encode("ascii"), t,
                on_complete=on_answer, on_failed=on_silence,
            )
        except TransferError as e:
            logger.error(f"[failover n{self.node}] cannot probe n{host} for {service}: {e}")
            return
        self.probing[service] = (host, probe)
        logger.info(f"[failover n{self.node}] n{host} silent, probing before taking {service}")

    def _drop_probe(self, service: str, reason: str) -> None:
        self.probing.pop(service, None)
        self.redeploys_aborted += 1
        logger.warning(f"[failover n{self.node}] takeover of {service} dropped: {reason}")

    def on_probe(self, source: int, payload: bytes, t: int) -> None:
        """A peer thinks this node is gone; the transport has already ACKed,
        a heartbeat refreshes every other observer."""
        if not self.alive:
            return
        service = payload[len(PROBE_PREFIX):].decode("ascii", errors="replace")
        logger.info(f"[failover n{self.node}] probed by n{source} about {service}")
        if service in self.running:
            self._send_heartbeat()

    def execute_redeploy(
        self, service: str, from_node: int, t: int, outage_start: int | None = None
    ) -> int | None:
        """Start ``service`` here; returns the completion time, None when the
        node cannot take it."""
        if not self.alive or service in self.running or service in self.pending:
            return None
        spec = self.layout.services[service]
        start_time = spec.start_time.sample(self.sim.rng("start_time"), spec.image_size_mb)
        if outage_start is None:
            outage_start = self.registry.outage_start(service)
            if outage_start is None:
                outage_start = t
        epoch = max(self.view[service][1], self.running.get(service, 0)) + 1
        handle = self.sim.schedule(
            t + start_time, self._complete_redeploy, service, target=self.node, label="redeploy"
        )
        self.pending[service] = PendingRedeploy(
            service, from_node, epoch, outage_start, t, start_time, handle
        )
        logger.info(
            f"[failover n{self.node}] starting {service} ({spec.image_size_mb} MB) "
            f"taken from n{from_node}, ready in {start_time / 1e6:.2f}s"
        )
        return t + start_time

    def _complete_redeploy(self, service: str) -> None:
        pending = self.pending.pop(service)
        t = self.sim.now
        self.running[service] = pending.epoch
        self.view[service] = (self.node, pending.epoch)
        self._killed.pop(service, None)
        self._vacant_since.pop(service, None)
        self.registry.start(service, self.node, t)
        record = FailoverRecord(
            service=service,
            from_node=pending.from_node,
            to_node=self.node,
            outage_start=pending.outage_start,
            detected_at=pending.detected_at,
            start_time=pending.start_time,
            completed_at=t,
        )
        self.records.append(record)
        logger.info(
            f"[failover n{self.node}] {service}@{pending.epoch} running, "
            f"detect {record.detection_delay / 1e6:.1f}s + start {record.start_time / 1e6:.2f}s"
        )
        if self.on_record is not None:
            self.on_record(record)
        self._send_heartbeat()

    def _abort(self, pending: PendingRedeploy, reason: str) -> None:
        self.sim.cancel(pending.handle)
        self.pending.pop(pending.service, None)
        self.redeploys_aborted += 1
        logger.error(f"[failover n{self.node}] redeploy of {pending.service} aborted: {reason}")
