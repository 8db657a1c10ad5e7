import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from src.radio.medium import RadioMedium
from src.sim.kernel import US_PER_S, EventHandle, Simulator

from .frame import (
    BROADCAST,
    DEFAULT_MAX_MESSAGE_SIZE,
    MAX_FRAME_SIZE,
    MAX_NACK_INDICES,
    Frame,
    FrameError,
    FrameHeader,
    FrameKind,
    decode_frame,
    decode_nack_body,
    encode_message,
    encode_nack_body,
)
from .gate import RadioAccessGate
from .reassembly import (
    DEFAULT_IDLE_TIMEOUT,
    FragmentStatus,
    Key,
    ReassemblyError,
    ReassemblySet,
)

logger = logging.getLogger("loraheal")

DEFAULT_MAX_RETRIES = 5
MIN_GAP_TIMEOUT = 2 * US_PER_S
HOUSEKEEPING_INTERVAL = 60 * US_PER_S

DeliverCallback = Callable[[FrameKind, int, bytes, int], None]  # kind, source, payload, t


class TransferError(ValueError):
    pass


class TransferState(Enum):
    ACTIVE = "active"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass(eq=False)
class OutboundTransfer:
    key: Key
    dest: int
    kind: FrameKind
    frames: list[Frame]
    started_at: int
    max_retries: int = DEFAULT_MAX_RETRIES
    unacked: int = 0  # bitmap of fragments the receiver has not confirmed
    attempts: list[int] = field(default_factory=list)
    retransmit_deadline: int | None = None
    state: TransferState = TransferState.ACTIVE
    retransmissions: int = 0
    rounds: int = 0
    finished_at: int | None = None
    failure_reason: str | None = None
    on_complete: Callable[["OutboundTransfer", int], None] | None = field(default=None, repr=False)
    on_failed: Callable[["OutboundTransfer", int], None] | None = field(default=None, repr=False)
    _timer: EventHandle | None = field(default=None, repr=False)
    _round: int = field(default=0, repr=False)
    _pending: set[int] = field(default_factory=set, repr=False)  # queued, not yet on air

    @property
    def fragment_total(self) -> int:
        return len(self.frames)

    def unacked_indices(self) -> list[int]:
        return [i for i in range(self.fragment_total) if self.unacked >> i & 1]


@dataclass
class _InboundState:
    timer: EventHandle | None = None
    nack_rounds: int = 0


class ReliableTransport:
    """Per-node sender/receiver state machines over the shared radio.

    Senders push every fragment through the radio gate and wait for a single
    ACK. Receivers run a gap timer per incomplete message and NACK exactly the
    missing fragment indices when it fires; senders fall back to resending
    all unconfirmed fragments when neither ACK nor NACK shows up.
    """

    def __init__(
        self,
        sim: Simulator,
        medium: RadioMedium,
        node: int,
        on_deliver: DeliverCallback,
        max_retries: int = DEFAULT_MAX_RETRIES,
        idle_timeout: int = DEFAULT_IDLE_TIMEOUT,
        max_message_size: int = DEFAULT_MAX_MESSAGE_SIZE,
    ):
        self.sim = sim
        self.medium = medium
        self.node = node
        self.on_deliver = on_deliver
        self.on_frame_heard: Callable[[int, int], None] | None = None  # (source, t), any dest
        self.max_retries = max_retries
        self.idle_timeout = idle_timeout
        self.max_message_size = max_message_size
        self.gate = RadioAccessGate(sim, medium, node)
        self.reassembly = ReassemblySet(idle_timeout)
        self.alive = True

        self._next_message_id = 0
        self._outbound: dict[Key, OutboundTransfer] = {}
        self._inbound: dict[Key, _InboundState] = {}
        self._completed: dict[Key, int] = {}  # delivered messages -> completion time
        self._control_queued: set[tuple[FrameKind, Key]] = set()  # ACK/NACK waiting at the gate
        self._housekeeping = sim.schedule_in(
            HOUSEKEEPING_INTERVAL, self._tidy, target=node, label="xfer_tidy"
        )

        self.retransmissions = 0
        self.transfers_completed = 0
        self.transfers_failed = 0
        self.acks_sent = 0
        self.nacks_sent = 0
        self.protocol_errors = 0
        self.expired_messages = 0

    # -- timing -------------------------------------------------------------

    def full_frame_airtime(self) -> int:
        return self.medium.airtime(MAX_FRAME_SIZE)

    def gap_timeout(self, fragment_total: int) -> int:
        return max(MIN_GAP_TIMEOUT, 2 * self.full_frame_airtime() * fragment_total)

    def sender_timeout(self, fragment_total: int) -> int:
        gap = self.gap_timeout(fragment_total)
        backoff = int(self.sim.rng_draw("backoff") * gap)
        return gap + 2 * self.full_frame_airtime() + backoff

    # -- sending ------------------------------------------------------------

    def _allocate_message_id(self) -> int:
        for _ in range(0x10000):
            mid = self._next_message_id
            self._next_message_id = (self._next_message_id + 1) & 0xFFFF
            if (self.node, mid) not in self._outbound:
                return mid
        raise TransferError(f"node {self.node} has 65536 transfers in flight")

    def send_reliable(
        self,
        dest: int,
        kind: FrameKind,
        payload: bytes,
        t: int,
        on_complete: Callable[[OutboundTransfer, int], None] | None = None,
        on_failed: Callable[[OutboundTransfer, int], None] | None = None,
    ) -> OutboundTransfer:
        if not self.alive:
            raise TransferError(f"node {self.node} is offline")
        if dest == self.node:
            raise TransferError("reliable transfer to self")
        if dest == BROADCAST:
            raise TransferError("reliable transfer is unicast; use send_best_effort for broadcast")
        if not FrameKind(kind).is_data:
            raise TransferError(f"{FrameKind(kind).name} is not a data kind")
        mid = self._allocate_message_id()
        try:
            frames = encode_message(kind, self.node, dest, mid, payload, self.max_message_size)
        except FrameError as e:
            raise TransferError(str(e)) from e

        transfer = OutboundTransfer(
            key=(self.node, mid),
            dest=dest,
            kind=FrameKind(kind),
            frames=frames,
            started_at=t,
            max_retries=self.max_retries,
            unacked=(1 << len(frames)) - 1,
            attempts=[0] * len(frames),
            on_complete=on_complete,
            on_failed=on_failed,
        )
        self._outbound[transfer.key] = transfer
        logger.debug(
            f"[xfer n{self.node}] msg {mid} -> n{dest}: {len(payload)}B in {len(frames)} fragments"
        )
        self._send_round(transfer, list(range(len(frames))))
        return transfer

    def send_best_effort(self, dest: int, kind: FrameKind, payload: bytes, t: int) -> int | None:
        """Queue one frame with no timer and no retransmission; returns its start time."""
        if not self.alive:
            return None
        kind = FrameKind(kind)
        mid = self._allocate_message_id()
        try:
            if kind.is_data:
                frames = encode_message(kind, self.node, dest, mid, payload, self.max_message_size)
                if len(frames) > 1:
                    raise TransferError(
                        f"best-effort payload of {len(payload)}B needs {len(frames)} fragments"
                    )
                frame = frames[0]
            else:
                frame = Frame(FrameHeader(kind, self.node, dest, mid), payload)
        except FrameError as e:
            raise TransferError(str(e)) from e
        return self.gate.gate_acquire(frame.encode(), t)

    def _send_round(self, transfer: OutboundTransfer, indices: list[int]) -> None:
        transfer._round += 1
        round_id = transfer._round
        transfer.retransmit_deadline = None
        for pos, i in enumerate(indices):
            transfer.attempts[i] += 1
            transfer._pending.add(i)
            last = pos == len(indices) - 1
            self.gate.gate_acquire(
                transfer.frames[i].encode(),
                self.sim.now,
                on_sent=self._sent_callback(transfer, i, round_id, last),
            )

    def _sent_callback(self, transfer: OutboundTransfer, index: int, round_id: int, last: bool):
        def on_sent(start: int, end: int) -> None:
            transfer._pending.discard(index)
            if not last or transfer.state is not TransferState.ACTIVE or transfer._round != round_id:
                return
            deadline = end + self.sender_timeout(transfer.fragment_total)
            transfer.retransmit_deadline = deadline
            self.sim.cancel(transfer._timer)
            transfer._timer = self.sim.schedule(
                deadline, self._on_sender_timeout, transfer, target=self.node, label="xfer_timeout"
            )

        return on_sent

    def _retransmit(self, transfer: OutboundTransfer, indices: list[int], reason: str) -> None:
        indices = [i for i in indices if i not in transfer._pending]
        if not indices:
            return
        exhausted = [i for i in indices if transfer.attempts[i] >= transfer.max_retries + 1]
        if exhausted:
            self._fail(transfer, f"fragment {exhausted[0]} exhausted {transfer.max_retries} retries")
            return
        self.sim.cancel(transfer._timer)
        transfer._timer = None
        transfer.retransmissions += len(indices)
        transfer.rounds += 1
        self.retransmissions += len(indices)
        logger.debug(
            f"[xfer n{self.node}] msg {transfer.key[1]} {reason}: resending {indices}"
        )
        self._send_round(transfer, indices)

    def _on_sender_timeout(self, transfer: OutboundTransfer) -> None:
        transfer._timer = None
        if transfer.state is not TransferState.ACTIVE:
            return
        # everything NACK-confirmed but no ACK: the last fragment draws an ACK
        # from a finished receiver or a fresh NACK from one that lost its buffer
        indices = transfer.unacked_indices() or [transfer.fragment_total - 1]
        self._retransmit(transfer, indices, "timeout")

    def _finish(self, transfer: OutboundTransfer, state: TransferState, t: int) -> None:
        transfer.state = state
        transfer.finished_at = t
        transfer.retransmit_deadline = None
        self.sim.cancel(transfer._timer)
        transfer._timer = None
        self._outbound.pop(transfer.key, None)

    def _fail(self, transfer: OutboundTransfer, reason: str) -> None:
        transfer.failure_reason = reason
        self._finish(transfer, TransferState.FAILED, self.sim.now)
        self.transfers_failed += 1
        logger.warning(f"[xfer n{self.node}] msg {transfer.key[1]} -> n{transfer.dest} failed: {reason}")
        if transfer.on_failed is not None:
            transfer.on_failed(transfer, self.sim.now)

    # -- receiving ----------------------------------------------------------

    def handle_wire(self, wire: bytes, t: int) -> None:
        if not self.alive:
            return
        try:
            frame = decode_frame(wire)
        except FrameError as e:
            self.protocol_errors += 1
            logger.warning(f"[xfer n{self.node}] malformed frame dropped: {e}")
            return
        if self.on_frame_heard is not None:
            self.on_frame_heard(frame.header.source, t)
        if frame.header.dest not in (self.node, BROADCAST):
            return
        self.on_frame_received(frame, t)

    def on_frame_received(self, frame: Frame, t: int) -> None:
        kind = frame.kind
        if kind is FrameKind.ACK:
            self._on_ack(frame, t)
        elif kind is FrameKind.NACK:
            self._on_nack(frame, t)
        elif kind is FrameKind.HEARTBEAT:
            self.on_deliver(kind, frame.header.source, frame.body, t)
        else:
            self._on_data(frame, t)

    def _lookup_ack_target(self, frame: Frame) -> OutboundTransfer | None:
        transfer = self._outbound.get((self.node, frame.header.message_id))
        if transfer is None or transfer.dest != frame.header.source:
            logger.debug(
                f"[xfer n{self.node}] {frame.kind.name} for unknown msg "
                f"{frame.header.message_id} from n{frame.header.source} ignored"
            )
            return None
        return transfer

    def _on_ack(self, frame: Frame, t: int) -> None:
        transfer = self._lookup_ack_target(frame)
        if transfer is None:
            return
        transfer.unacked = 0
        self._finish(transfer, TransferState.COMPLETED, t)
        self.transfers_completed += 1
        if transfer.on_complete is not None:
            transfer.on_complete(transfer, t)

    def _on_nack(self, frame: Frame, t: int) -> None:
        transfer = self._lookup_ack_target(frame)
        if transfer is None:
            return
        try:
            missing = decode_nack_body(frame.body)
        except FrameError as e:
            self.protocol_errors += 1
            logger.warning(f"[xfer n{self.node}] bad NACK dropped: {e}")
            return
        missing = [i for i in missing if i < transfer.fragment_total]
        if not missing:
            return
        confirmed_below = missing[-1] if len(missing) == MAX_NACK_INDICES else transfer.fragment_total
        listed = set(missing)
        for i in range(confirmed_below):
            if i not in listed:
                transfer.unacked &= ~(1 << i)
        for i in listed:
            transfer.unacked |= 1 << i
        self._retransmit(transfer, missing, "NACK")

    def _on_data(self, frame: Frame, t: int) -> None:
        key = frame.key
        unicast = frame.header.dest != BROADCAST
        if key in self._completed:
            if unicast:
                self._send_ack(frame)
            return
        try:
            result = self.reassembly.accept_fragment(frame, t)
        except ReassemblyError as e:
            self.protocol_errors += 1
            logger.warning(f"[xfer n{self.node}] fragment from n{key[0]} dropped: {e}")
            return

        if result.status is FragmentStatus.DUPLICATE:
            return
        state = self._inbound.setdefault(key, _InboundState())
        self.sim.cancel(state.timer)
        if result.status is FragmentStatus.INCOMPLETE:
            if unicast:
                state.timer = self.sim.schedule_in(
                    self.gap_timeout(frame.header.fragment_total),
                    self._on_gap_timeout,
                    key,
                    target=self.node,
                    label="gap_timeout",
                )
            return

        del self._inbound[key]
        self._completed[key] = t
        if unicast:
            self._send_ack(frame)
        self.on_deliver(frame.kind, key[0], result.payload, t)

    def _queue_control(self, frame: Frame, key: Key) -> bool:
        """Queue an ACK or NACK unless one for the same message is still waiting."""
        tag = (frame.kind, key)
        if tag in self._control_queued:
            return False
        self._control_queued.add(tag)
        self.gate.gate_acquire(
            frame.encode(), self.sim.now, on_sent=lambda start, end: self._control_queued.discard(tag)
        )
        return True

    def _send_ack(self, frame: Frame) -> None:
        header = FrameHeader(FrameKind.ACK, self.node, frame.header.source, frame.header.message_id)
        if self._queue_control(Frame(header), frame.key):
            self.acks_sent += 1

    def _on_gap_timeout(self, key: Key) -> None:
        state = self._inbound.get(key)
        buf = self.reassembly.get(key)
        if state is None or buf is None:
            return
        state.timer = None
        state.nack_rounds += 1
        if state.nack_rounds > self.max_retries + 1:
            return
        missing = buf.missing()[:MAX_NACK_INDICES]
        header = FrameHeader(FrameKind.NACK, self.node, key[0], key[1])
        if self._queue_control(Frame(header, encode_nack_body(missing)), key):
            self.nacks_sent += 1
            logger.debug(f"[xfer n{self.node}] NACK msg {key[1]} to n{key[0]}: missing {missing}")
        state.timer = self.sim.schedule_in(
            self.gap_timeout(buf.expected_total),
            self._on_gap_timeout,
            key,
            target=self.node,
            label="gap_timeout",
        )

    # -- lifecycle ----------------------------------------------------------

    def _tidy(self) -> None:
        now = self.sim.now
        for key in self.reassembly.expire_buffers(now):
            state = self._inbound.pop(key, None)
            if state is not None:
                self.sim.cancel(state.timer)
            self.expired_messages += 1
        stale = [k for k, done in self._completed.items() if now - done >= self.idle_timeout]
        for key in stale:
            del self._completed[key]
        self._housekeeping = self.sim.schedule_in(
            HOUSEKEEPING_INTERVAL, self._tidy, target=self.node, label="xfer_tidy"
        )

    def active_transfers(self) -> list[OutboundTransfer]:
        return list(self._outbound.values())

    def shutdown(self) -> None:
        """Node death: drop the radio queue, timers, buffers and transfers."""
        if not self.alive:
            return
        self.alive = False
        dropped = self.gate.shutdown()
        self._control_queued.clear()
        for state in self._inbound.values():
            self.sim.cancel(state.timer)
        self._inbound.clear()
        self.reassembly = ReassemblySet(self.idle_timeout)
        self._completed.clear()
        for transfer in list(self._outbound.values()):
            self._fail(transfer, "node offline")
        logger.debug(f"[xfer n{self.node}] shut down, {dropped} queued frames dropped")

    def restart(self) -> None:
        self.alive = True
        self.gate.reopen()
