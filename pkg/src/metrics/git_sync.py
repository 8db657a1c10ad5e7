"""Versioned file sync over the radio, Git-bundle style.

Repository contents are opaque: a version is a content hash, and a bundle
carries a synthetic blob that moves a node from its base version to a new
one. Full bundles (base ``*``) bring any node to their version and answer
resync requests from nodes that fell behind.
"""

import hashlib
import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum

from src.core.models import BundleRecord
from src.protocol.frame import FrameKind, fragment_count
from src.protocol.transport import OutboundTransfer, ReliableTransport, TransferError, TransferState
from src.sim.kernel import EventHandle, Simulator

logger = logging.getLogger("loraheal")

GENESIS_VERSION = hashlib.sha256(b"genesis").hexdigest()[:16]
FULL_BASE = "*"
BUNDLE_MAGIC = b"LHB1"
RESYNC_PREFIX = b"RESYNC "
DEFAULT_RESYNC_BYTES = 32 * 1024


class BundleError(ValueError):
    pass


class ApplyOutcome(Enum):
    APPLIED = "applied"
    DUPLICATE = "duplicate"
    REJECTED = "rejected"


@dataclass(frozen=True)
class Bundle:
    bundle_id: str
    base_version: str
    new_version: str
    blob: bytes

    @property
    def size_bytes(self) -> int:
        return len(self.blob)

    @property
    def full(self) -> bool:
        return self.base_version == FULL_BASE

    def encode(self) -> bytes:
        head = b" ".join(
            [
                BUNDLE_MAGIC,
                self.bundle_id.encode("ascii"),
                self.base_version.encode("ascii"),
                self.new_version.encode("ascii"),
                str(len(self.blob)).encode("ascii"),
            ]
        )
        return head + b"\n" + self.blob

    @classmethod
    def decode(cls, raw: bytes) -> "Bundle":
        head, sep, blob = raw.partition(b"\n")
        parts = head.split(b" ")
        if not sep or len(parts) != 5 or parts[0] != BUNDLE_MAGIC:
            raise BundleError("not a bundle")
        try:
            size = int(parts[4])
        except ValueError:
            raise BundleError(f"bad bundle size {parts[4]!r}") from None
        if size != len(blob):
            raise BundleError(f"bundle announces {size} bytes, carries {len(blob)}")
        bundle_id, base, new = (p.decode("ascii") for p in parts[1:4])
        return cls(bundle_id, base, new, blob)


def synthetic_blob(seed: str, size: int) -> bytes:
    """Deterministic pseudo-content: sha256 in counter mode."""
    out = bytearray()
    counter = 0
    while len(out) < size:
        out += hashlib.sha256(f"{seed}:{counter}".encode("ascii")).digest()
        counter += 1
    return bytes(out[:size])


def next_version(base: str, commit: int) -> str:
    return hashlib.sha256(f"{base}:{commit}".encode("ascii")).hexdigest()[:16]


def make_bundle(from_version: str, to_version: str, payload_size: int) -> Bundle:
    if from_version == to_version:
        raise BundleError("bundle needs distinct base and target versions")
    if payload_size < 0:
        raise BundleError("bundle size must be non-negative")
    seed = f"{from_version}->{to_version}"
    bundle_id = hashlib.sha256(f"{seed}:{payload_size}".encode("ascii")).hexdigest()[:12]
    return Bundle(bundle_id, from_version, to_version, synthetic_blob(seed, payload_size))


@dataclass
class NodeFileState:
    node: int
    current_version: str = GENESIS_VERSION


def apply_bundle(state: NodeFileState, bundle: Bundle) -> ApplyOutcome:
    if state.current_version == bundle.new_version:
        return ApplyOutcome.DUPLICATE
    if not bundle.full and state.current_version != bundle.base_version:
        return ApplyOutcome.REJECTED
    state.current_version = bundle.new_version
    return ApplyOutcome.APPLIED


class GitSyncManager:
    """Publishes bundles from one node and applies them everywhere else.

    Pushes leave one at a time: the next peer's transfer starts only when the
    previous one completed or failed, so a publish never floods the node's
    radio queue ahead of its metric ACKs.
    """

    def __init__(
        self,
        sim: Simulator,
        node: int,
        peers: list[int],
        transport: ReliableTransport,
        journal: dict[tuple[str, int], BundleRecord],
        publisher: int | None = None,
        bundle_interval: int | None = None,
        bundle_sizes: tuple[int, ...] = (),
        resync_bytes: int = DEFAULT_RESYNC_BYTES,
    ):
        self.sim = sim
        self.node = node
        self.peers = sorted(p for p in peers if p != node)
        self.transport = transport
        self.journal = journal
        self.publisher = publisher
        self.bundle_interval = bundle_interval
        self.bundle_sizes = bundle_sizes
        self.resync_bytes = resync_bytes
        self.state = NodeFileState(node)
        self.alive = False
        self.rejections = 0
        self._commits = 0
        self._timer: EventHandle | None = None
        self._outbox: deque[tuple[Bundle, BundleRecord]] = deque()
        self._in_flight: OutboundTransfer | None = None

    @property
    def is_publisher(self) -> bool:
        return self.publisher == self.node

    def start(self, t: int) -> None:
        self.alive = True
        if self.is_publisher and self.bundle_interval and self.bundle_sizes:
            self._timer = self.sim.schedule(
                t + self.bundle_interval, self._on_publish_timer, target=self.node, label="bundle"
            )

    def shutdown(self) -> None:
        self.alive = False
        self.sim.cancel(self._timer)
        self._in_flight = None
        while self._outbox:
            _, record = self._outbox.popleft()
            if record.outcome == "pending":
                record.outcome = "lost"

    @property
    def queued_pushes(self) -> int:
        return len(self._outbox)

    def _on_publish_timer(self) -> None:
        if not self.alive:
            return
        size = self.bundle_sizes[self._commits % len(self.bundle_sizes)]
        self.publish(size, self.sim.now)
        self._timer = self.sim.schedule_in(
            self.bundle_interval, self._on_publish_timer, target=self.node, label="bundle"
        )

    def publish(self, size: int, t: int) -> Bundle:
        """Commit locally and push the incremental bundle to every peer."""
        base = self.state.current_version
        self._commits += 1
        bundle = make_bundle(base, next_version(base, self._commits), size)
        apply_bundle(self.state, bundle)
        logger.info(
            f"[sync n{self.node}] published {bundle.bundle_id} "
            f"({size}B, {base[:6]} -> {bundle.new_version[:6]})"
        )
        for peer in self.peers:
            self._push(bundle, peer, t)
        return bundle

    def _push(self, bundle: Bundle, peer: int, t: int) -> None:
        wire = bundle.encode()
        record = BundleRecord(
            bundle_id=bundle.bundle_id,
            publisher=self.node,
            node=peer,
            size_bytes=bundle.size_bytes,
            frames=fragment_count(len(wire)),
            published_at=t,
        )
        self.journal[(bundle.bundle_id, peer)] = record
        self._outbox.append((bundle, record))
        self._drain()

    def _drain(self) -> None:
        while self._in_flight is None and self._outbox:
            bundle, record = self._outbox.popleft()

            def on_done(transfer: OutboundTransfer, when: int, record: BundleRecord = record) -> None:
                if transfer.state is TransferState.FAILED and record.outcome == "pending":
                    record.outcome = "lost"
                if self._in_flight is transfer:
                    self._in_flight = None
                    self._drain()

            try:
                self._in_flight = self.transport.send_reliable(
                    record.node, FrameKind.BUNDLE_DATA, bundle.encode(), self.sim.now,
                    on_complete=on_done, on_failed=on_done,
                )
            except TransferError as e:
                logger.error(f"[sync n{self.node}] cannot push {bundle.bundle_id} to n{record.node}: {e}")
                record.outcome = "lost"

    def on_bundle(self, source: int, payload: bytes, t: int) -> ApplyOutcome | None:
        if not self.alive:
            return None
        try:
            bundle = Bundle.decode(payload)
        except BundleError as e:
            logger.warning(f"[sync n{self.node}] bundle from n{source} dropped: {e}")
            return None
        outcome = apply_bundle(self.state, bundle)
        record = self.journal.get((bundle.bundle_id, self.node))
        if record is not None and record.outcome in ("pending", "lost"):
            record.outcome = outcome.value
            if outcome is not ApplyOutcome.REJECTED:
                record.applied_at = t
        if outcome is ApplyOutcome.REJECTED:
            self.rejections += 1
            logger.warning(
                f"[sync n{self.node}] {bundle.bundle_id} expects {bundle.base_version[:6]}, "
                f"have {self.state.current_version[:6]}; requesting resync"
            )
            self._request_resync(source, t)
        else:
            logger.debug(f"[sync n{self.node}] {bundle.bundle_id} {outcome.value}")
        return outcome

    def _request_resync(self, publisher: int, t: int) -> None:
        body = RESYNC_PREFIX + self.state.current_version.encode("ascii")
        try:
            self.transport.send_reliable(publisher, FrameKind.DATA, body, t)
        except TransferError as e:
            logger.error(f"[sync n{self.node}] resync request failed: {e}")

    def on_data(self, source: int, payload: bytes, t: int) -> None:
        if not self.alive or not payload.startswith(RESYNC_PREFIX):
            return
        if not self.is_publisher:
            return
        stale = payload[len(RESYNC_PREFIX):].decode("ascii", errors="replace")
        logger.info(f"[sync n{self.node}] n{source} at {stale[:6]} asked for a resync")
        bundle = make_bundle(FULL_BASE, self.state.current_version, self.resync_bytes)
        self._push(bundle, source, t)
