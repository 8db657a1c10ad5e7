from collections import defaultdict, deque
from dataclasses import dataclass, field
from fractions import Fraction
import math
from typing import Iterable

from src.core.models import TransmissionRecord
from src.sim.kernel import US_PER_HOUR

from .params import RadioError

POLICIES = ("window", "backoff")


@dataclass
class DutyCycleLedger:
    """Airtime ledger for one node.

    Window policy: a frame of airtime ``a`` ending at ``t + a`` is admitted
    when every transmission ending inside ``(t + a - window, t + a]`` plus the
    new frame stays within ``budget_fraction * window``.
    Backoff policy additionally keeps the node silent for
    ``airtime * (1 / budget_fraction - 1)`` after each frame.
    """

    window_us: int = US_PER_HOUR
    budget_fraction: Fraction = Fraction(1, 100)
    policy: str = "window"
    _entries: deque[tuple[int, int]] = field(default_factory=deque, init=False)

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise RadioError(f"unknown duty-cycle policy '{self.policy}'")
        self.budget_fraction = Fraction(self.budget_fraction)
        if not 0 < self.budget_fraction <= 1:
            raise RadioError(f"budget fraction must be in (0, 1], got {self.budget_fraction}")

    @property
    def budget_us(self) -> int:
        return math.floor(self.window_us * self.budget_fraction)

    def used(self, t: int) -> int:
        """Airtime of frames ending inside the window that closes at ``t``."""
        return sum(a for s, a in self._entries if s + a > t - self.window_us)

    def admit_time(self, t: int, airtime: int) -> int:
        if airtime > self.budget_us:
            raise RadioError(
                f"frame airtime {airtime}us exceeds the whole budget {self.budget_us}us"
            )
        earliest = t
        if self.policy == "backoff" and self._entries:
            last_start, last_air = self._entries[-1]
            silence = math.ceil(last_air * (1 / self.budget_fraction - 1))
            earliest = max(earliest, last_start + last_air + silence)

        horizon = earliest + airtime - self.window_us
        relevant = [(s, a) for s, a in self._entries if s + a > horizon]
        total = sum(a for _, a in relevant)
        excess = total + airtime - self.budget_us
        if excess <= 0:
            return earliest
        dropped = 0
        for s, a in relevant:
            dropped += a
            if dropped >= excess:
                # once this frame ends at or before the horizon it stops counting
                return max(earliest, s + a + self.window_us - airtime)
        return earliest  # unreachable: airtime <= budget

    def admits(self, t: int, airtime: int) -> bool:
        return self.admit_time(t, airtime) == t

    def record(self, start: int, airtime: int) -> None:
        self._entries.append((start, airtime))
        cutoff = start - self.window_us
        while len(self._entries) > 1 and sum(self._entries[0]) <= cutoff:
            self._entries.popleft()


def max_window_airtime(
    records: Iterable[TransmissionRecord],
    window_us: int = US_PER_HOUR,
) -> dict[int, int]:
    """Peak airtime per node over every window that closes at a frame end."""
    by_node: dict[int, list[TransmissionRecord]] = defaultdict(list)
    for rec in records:
        by_node[rec.sender].append(rec)

    peaks: dict[int, int] = {}
    for node, recs in by_node.items():
        recs.sort(key=lambda r: r.end)
        lo = 0
        running = 0
        peak = 0
        for hi, rec in enumerate(recs):
            running += rec.airtime
            while recs[lo].end <= rec.end - window_us:
                running -= recs[lo].airtime
                lo += 1
            peak = max(peak, running)
        peaks[node] = peak
    return peaks
