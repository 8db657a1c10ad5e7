import heapq
import logging
import zlib
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

logger = logging.getLogger("loraheal")

US_PER_MS = 1_000
US_PER_S = 1_000_000
US_PER_MIN = 60 * US_PER_S
US_PER_HOUR = 60 * US_PER_MIN

GLOBAL = -1  # event target for cluster-wide actions

DEFAULT_STREAMS = (
    "loss",
    "jitter",
    "backoff",
    "start_time",
    "shadowing",
    "load",
    "offsets",
    "payload",
)


def seconds(value: float) -> int:
    """Convert seconds to integer microseconds."""
    return int(round(value * US_PER_S))


class SchedulingError(ValueError):
    pass


class UnknownStreamError(KeyError):
    pass


@dataclass(order=True, slots=True)
class Event:
    fire_time: int
    sequence_number: int
    target: int = field(compare=False, default=GLOBAL)
    label: str = field(compare=False, default="")
    action: Callable[..., Any] | None = field(compare=False, default=None, repr=False)
    args: tuple = field(compare=False, default=(), repr=False)
    cancelled: bool = field(compare=False, default=False)


class EventHandle:
    __slots__ = ("_event",)

    def __init__(self, event: Event):
        self._event = event

    @property
    def fire_time(self) -> int:
        return self._event.fire_time

    @property
    def active(self) -> bool:
        return not self._event.cancelled

    def cancel(self) -> None:
        self._event.cancelled = True


class Simulator:
    """Single-threaded discrete-event loop on an integer microsecond clock.

    Events that share a fire time run in the order they were scheduled.
    Randomness comes from named streams derived from the scenario seed so
    that drawing more values on one stream never shifts another.
    """

    def __init__(
        self,
        seed: int,
        streams: tuple[str, ...] = DEFAULT_STREAMS,
        trace: bool = False,
    ):
        self.seed = seed
        self._now = 0
        self._queue: list[Event] = []
        self._sequence = 0
        self._streams: dict[str, np.random.Generator] = {}
        self._trace_enabled = trace
        self.trace: list[tuple[int, int, int, str]] = []
        for name in streams:
            self.register_stream(name)

    @property
    def now(self) -> int:
        return self._now

    def pending(self) -> int:
        return sum(1 for e in self._queue if not e.cancelled)

    # -- scheduling -----------------------------------------------------

    def schedule(
        self,
        fire_time: int,
        action: Callable[..., Any],
        *args: Any,
        target: int = GLOBAL,
        label: str = "",
    ) -> EventHandle:
        if fire_time < self._now:
            raise SchedulingError(
                f"cannot schedule '{label}' at {fire_time}us, clock is {self._now}us"
            )
        event = Event(
            fire_time=int(fire_time),
            sequence_number=self._sequence,
            target=target,
            label=label,
            action=action,
            args=args,
        )
        self._sequence += 1
        heapq.heappush(self._queue, event)
        return EventHandle(event)

    def schedule_in(
        self,
        delay: int,
        action: Callable[..., Any],
        *args: Any,
        target: int = GLOBAL,
        label: str = "",
    ) -> EventHandle:
        return self.schedule(self._now + delay, action, *args, target=target, label=label)

    def cancel(self, handle: EventHandle | None) -> None:
        if handle is not None:
            handle.cancel()

    def run_until(self, t_end: int) -> int:
        dispatched = 0
        while self._queue and self._queue[0].fire_time <= t_end:
            event = heapq.heappop(self._queue)
            if event.cancelled:
                continue
            self._now = event.fire_time
            if self._trace_enabled:
                self.trace.append(
                    (event.fire_time, event.sequence_number, event.target, event.label)
                )
            event.cancelled = True  # handles report inactive once fired
            event.action(*event.args)
            dispatched += 1
        if t_end > self._now:
            self._now = t_end
        return dispatched

    # -- randomness -----------------------------------------------------

    def register_stream(self, name: str) -> None:
        if name in self._streams:
            return
        # crc32 keeps stream derivation stable across interpreter runs
        entropy = [self.seed, zlib.crc32(name.encode("utf-8"))]
        self._streams[name] = np.random.default_rng(np.random.SeedSequence(entropy))

    def rng(self, stream: str) -> np.random.Generator:
        try:
            return self._streams[stream]
        except KeyError:
            raise UnknownStreamError(f"unknown random stream '{stream}'") from None

    def rng_draw(self, stream: str) -> float:
        return float(self.rng(stream).random())
