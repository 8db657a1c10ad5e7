import copy
import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable

from src.radio.medium import Accepted, RadioMedium
from src.sim.kernel import EventHandle, Simulator

logger = logging.getLogger("loraheal")

SentCallback = Callable[[int, int], None]  # (start, end) of the accepted frame


@dataclass
class SendRequest:
    wire: bytes
    enqueued_at: int
    on_sent: SentCallback | None = None


class RadioAccessGate:
    """Serialises one node's radio: a FIFO queue, one frame on air at a time,
    and every frame admitted by the node's duty-cycle ledger first."""

    def __init__(self, sim: Simulator, medium: RadioMedium, node: int):
        self.sim = sim
        self.medium = medium
        self.node = node
        self._queue: deque[SendRequest] = deque()
        self._busy_until = 0
        self._pump: EventHandle | None = None
        self.open = True
        self.frames_sent = 0
        self.deferrals = 0

    @property
    def queued(self) -> int:
        return len(self._queue)

    def gate_acquire(
        self,
        wire: bytes,
        t: int,
        on_sent: SentCallback | None = None,
    ) -> int | None:
        """Queue a frame; returns the start time it will get, or None when the
        node's radio is shut down."""
        if not self.open:
            return None
        request = SendRequest(wire, t, on_sent)
        self._queue.append(request)
        start = self._predict_start(request)
        if self._pump is None or not self._pump.active:
            self._pump = self.sim.schedule(
                max(t, self._busy_until, self.sim.now), self._run, target=self.node, label="gate"
            )
        return start

    def _predict_start(self, request: SendRequest) -> int:
        ledger = copy.deepcopy(self.medium.ledger(self.node))
        cursor = max(self.sim.now, self._busy_until)
        for queued in self._queue:
            air = self.medium.airtime(len(queued.wire))
            start = ledger.admit_time(max(cursor, queued.enqueued_at), air)
            if queued is request:
                return start
            ledger.record(start, air)
            cursor = start + air
        return cursor

    def _run(self) -> None:
        self._pump = None
        if not self.open or not self._queue:
            return
        now = self.sim.now
        if now < self._busy_until:
            self._pump = self.sim.schedule(self._busy_until, self._run, target=self.node, label="gate")
            return
        head = self._queue[0]
        result = self.medium.try_transmit(self.node, head.wire, now)
        if isinstance(result, Accepted):
            self._queue.popleft()
            self._busy_until = result.end
            self.frames_sent += 1
            if head.on_sent is not None:
                head.on_sent(result.start, result.end)
            if self._queue:
                self._pump = self.sim.schedule(result.end, self._run, target=self.node, label="gate")
        else:
            self.deferrals += 1
            logger.debug(
                f"[gate n{self.node}] duty budget spent, next frame at "
                f"{result.next_allowed / 1e6:.1f}s"
            )
            self._pump = self.sim.schedule(result.next_allowed, self._run, target=self.node, label="gate")

    def shutdown(self) -> int:
        """Close the gate and drop queued frames; returns how many were dropped."""
        dropped = len(self._queue)
        self._queue.clear()
        self.open = False
        if self._pump is not None:
            self._pump.cancel()
            self._pump = None
        return dropped

    def reopen(self) -> None:
        self.open = True
