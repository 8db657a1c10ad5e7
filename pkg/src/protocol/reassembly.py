import logging
from dataclasses import dataclass, field
from enum import Enum

from src.sim.kernel import US_PER_MIN

from .frame import Frame, FrameError, decode_payload

logger = logging.getLogger("loraheal")

DEFAULT_IDLE_TIMEOUT = 10 * US_PER_MIN

Key = tuple[int, int]  # (source, message_id)


class ReassemblyError(ValueError):
    pass


class FragmentStatus(Enum):
    INCOMPLETE = "incomplete"
    COMPLETE = "complete"
    DUPLICATE = "duplicate"


@dataclass
class AcceptResult:
    status: FragmentStatus
    missing: int = 0
    payload: bytes | None = None


@dataclass
class ReassemblyBuffer:
    key: Key
    expected_total: int
    first_seen: int
    last_seen: int
    received: int = 0  # bitmap, bit i set once fragment i arrived
    fragments: dict[int, bytes] = field(default_factory=dict)

    @property
    def received_count(self) -> int:
        return self.received.bit_count()

    @property
    def complete(self) -> bool:
        return self.received_count == self.expected_total

    def has(self, index: int) -> bool:
        return bool(self.received >> index & 1)

    def missing(self) -> list[int]:
        return [i for i in range(self.expected_total) if not self.has(i)]


class ReassemblySet:
    """Reassembly buffers of one receiving node, keyed by (source, message_id)."""

    def __init__(self, idle_timeout: int = DEFAULT_IDLE_TIMEOUT):
        self.idle_timeout = idle_timeout
        self._buffers: dict[Key, ReassemblyBuffer] = {}

    def __contains__(self, key: Key) -> bool:
        return key in self._buffers

    def __len__(self) -> int:
        return len(self._buffers)

    def get(self, key: Key) -> ReassemblyBuffer | None:
        return self._buffers.get(key)

    def accept_fragment(self, frame: Frame, t: int) -> AcceptResult:
        if not frame.kind.is_data:
            raise ReassemblyError(f"{frame.kind.name} frames carry no fragments")
        header = frame.header
        buf = self._buffers.get(frame.key)
        if buf is None:
            buf = ReassemblyBuffer(frame.key, header.fragment_total, first_seen=t, last_seen=t)
            self._buffers[frame.key] = buf
        elif buf.expected_total != header.fragment_total:
            raise ReassemblyError(
                f"message {frame.key} announced {buf.expected_total} fragments, "
                f"fragment {header.fragment_index} says {header.fragment_total}"
            )

        if buf.has(header.fragment_index):
            return AcceptResult(FragmentStatus.DUPLICATE, missing=buf.expected_total - buf.received_count)

        buf.received |= 1 << header.fragment_index
        buf.fragments[header.fragment_index] = frame.body
        buf.last_seen = t

        if not buf.complete:
            return AcceptResult(
                FragmentStatus.INCOMPLETE, missing=buf.expected_total - buf.received_count
            )

        del self._buffers[frame.key]
        bodies = [buf.fragments[i] for i in range(buf.expected_total)]
        try:
            payload = decode_payload(bodies)
        except FrameError as e:
            raise ReassemblyError(f"message {frame.key}: {e}") from None
        return AcceptResult(FragmentStatus.COMPLETE, payload=payload)

    def missing_fragments(self, key: Key) -> list[int]:
        buf = self._buffers.get(key)
        if buf is None:
            raise ReassemblyError(f"no reassembly buffer for {key}")
        return buf.missing()

    def discard(self, key: Key) -> None:
        self._buffers.pop(key, None)

    def expire_buffers(self, t: int) -> list[Key]:
        expired = [k for k, b in self._buffers.items() if t - b.last_seen >= self.idle_timeout]
        for key in expired:
            logger.debug(f"[reassembly] {key} idle for {self.idle_timeout // 1_000_000}s, dropped")
            del self._buffers[key]
        return expired
