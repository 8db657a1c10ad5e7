import logging
from dataclasses import dataclass

logger = logging.getLogger("loraheal")


@dataclass
class RunInterval:
    service: str
    node: int
    start: int
    end: int | None = None  # None while still running

    def overlaps(self, other: "RunInterval", horizon: int) -> tuple[int, int] | None:
        lo = max(self.start, other.start)
        hi = min(self.end if self.end is not None else horizon, other.end if other.end is not None else horizon)
        return (lo, hi) if lo < hi else None


@dataclass(frozen=True)
class OwnershipViolation:
    service: str
    nodes: tuple[int, int]
    start: int
    end: int


class ServiceRegistry:
    """Ground truth of where each service actually runs, over the whole run.

    Nodes never read it to make decisions; it exists to timestamp outages
    and to audit the single-owner property afterwards.
    """

    def __init__(self):
        self.intervals: list[RunInterval] = []
        self._open: dict[tuple[str, int], RunInterval] = {}
        self._stopped_at: dict[str, int] = {}

    def start(self, service: str, node: int, t: int) -> None:
        if (service, node) in self._open:
            return
        interval = RunInterval(service, node, t)
        self.intervals.append(interval)
        self._open[(service, node)] = interval

    def stop(self, service: str, node: int, t: int) -> bool:
        interval = self._open.pop((service, node), None)
        if interval is None:
            return False
        interval.end = t
        if not self.hosts(service):
            self._stopped_at[service] = t
        return True

    def stop_all(self, node: int, t: int) -> list[str]:
        stopped = sorted(s for s, n in self._open if n == node)
        for service in stopped:
            self.stop(service, node, t)
        return stopped

    def hosts(self, service: str) -> list[int]:
        return sorted(n for s, n in self._open if s == service)

    def running_on(self, node: int) -> list[str]:
        return sorted(s for s, n in self._open if n == node)

    def outage_start(self, service: str) -> int | None:
        """When the service last stopped running everywhere, None while it runs."""
        if self.hosts(service):
            return None
        return self._stopped_at.get(service)

    def violations(self, horizon: int) -> list[OwnershipViolation]:
        """Every overlap of two running intervals of one service on different nodes."""
        found = []
        by_service: dict[str, list[RunInterval]] = {}
        for interval in self.intervals:
            by_service.setdefault(interval.service, []).append(interval)
        for service, intervals in sorted(by_service.items()):
            for i, a in enumerate(intervals):
                for b in intervals[i + 1:]:
                    if a.node == b.node:
                        continue
                    span = a.overlaps(b, horizon)
                    if span is not None:
                        found.append(
                            OwnershipViolation(service, (min(a.node, b.node), max(a.node, b.node)), *span)
                        )
        return found

    def unplaced(self, services: list[str]) -> list[str]:
        return [s for s in services if not self.hosts(s)]
