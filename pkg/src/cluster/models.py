import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from src.sim.kernel import US_PER_S

logger = logging.getLogger("loraheal")

# Measured container start-up times (s) on nodes with a warm image cache,
# keyed by image size in MB.
REDEPLOY_SAMPLES: dict[float, tuple[float, ...]] = {
    8.83: (1.33, 1.31, 1.02, 0.98, 0.93, 0.92, 0.85),
    339.0: (0.94, 1.53, 0.98, 1.28, 1.00, 1.33, 0.92),
    5470.0: (1.17, 1.07, 1.30, 1.00, 1.31, 0.90, 1.00),
}
POOLED_SAMPLES: tuple[float, ...] = tuple(s for row in REDEPLOY_SAMPLES.values() for s in row)

START_TIME_KINDS = ("empirical", "empirical_by_size", "constant", "uniform")


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class StartTimeModel:
    kind: str = "empirical"
    value_s: float = 1.0  # constant
    low_s: float = 0.85  # uniform
    high_s: float = 1.53

    def __post_init__(self) -> None:
        if self.kind not in START_TIME_KINDS:
            raise LayoutError(f"start-time model must be one of {START_TIME_KINDS}, got {self.kind!r}")
        if self.kind == "constant" and self.value_s < 0:
            raise LayoutError("constant start time must be non-negative")
        if self.kind == "uniform" and not 0 <= self.low_s <= self.high_s:
            raise LayoutError(f"uniform start time needs 0 <= low <= high, got {self.low_s}..{self.high_s}")

    def sample(self, rng: np.random.Generator, image_size_mb: float) -> int:
        """Draw one container start-up duration in µs.

        Image size only matters for ``empirical_by_size``; every image is
        assumed to be cached on every node already.
        """
        if self.kind == "constant":
            seconds = self.value_s
        elif self.kind == "uniform":
            seconds = float(rng.uniform(self.low_s, self.high_s))
        elif self.kind == "empirical_by_size":
            nearest = min(REDEPLOY_SAMPLES, key=lambda size: abs(size - image_size_mb))
            seconds = float(rng.choice(REDEPLOY_SAMPLES[nearest]))
        else:
            seconds = float(rng.choice(POOLED_SAMPLES))
        return int(round(seconds * US_PER_S))


@dataclass(frozen=True)
class ServiceSpec:
    name: str
    image_size_mb: float
    start_time: StartTimeModel = field(default_factory=StartTimeModel)

    def __post_init__(self) -> None:
        if self.image_size_mb <= 0:
            raise LayoutError(f"{self.name}: image size must be positive, got {self.image_size_mb}")


@dataclass(frozen=True)
class Placement:
    primary: int
    fallbacks: tuple[int, ...]


@dataclass
class ServiceLayout:
    """Desired layout: every service with its primary host and ordered fallbacks."""

    services: dict[str, ServiceSpec]
    placements: dict[str, Placement]

    def validate(self, nodes: list[int] | set[int]) -> None:
        nodes = set(nodes)
        if set(self.services) != set(self.placements):
            raise LayoutError("every service needs exactly one placement")
        for name, placement in self.placements.items():
            if not placement.fallbacks:
                raise LayoutError(f"{name}: fallback list is empty")
            if len(set(placement.fallbacks)) != len(placement.fallbacks):
                raise LayoutError(f"{name}: fallback list has duplicates")
            if placement.primary in placement.fallbacks:
                raise LayoutError(f"{name}: primary node {placement.primary} is also a fallback")
            for node in (placement.primary, *placement.fallbacks):
                if node not in nodes:
                    raise LayoutError(f"{name}: node {node} is not defined in the scenario")

    def primary_of(self, service: str) -> int:
        return self.placements[service].primary

    def fallbacks_of(self, service: str) -> tuple[int, ...]:
        return self.placements[service].fallbacks

    def initial_services(self, node: int) -> list[str]:
        return sorted(s for s, p in self.placements.items() if p.primary == node)


class NodeState(Enum):
    ALIVE = "alive"
    SUSPECT = "suspect"
    OFFLINE = "offline"


@dataclass
class LivenessEntry:
    last_heartbeat: int
    state: NodeState = NodeState.ALIVE


class LivenessTable:
    """One observer's view of which peers are alive, from heartbeat arrival times."""

    def __init__(self, offline_timeout: int, suspect_after: int | None = None):
        self.offline_timeout = offline_timeout
        self.suspect_after = suspect_after if suspect_after is not None else offline_timeout * 2 // 3
        self._entries: dict[int, LivenessEntry] = {}

    def track(self, node: int, t: int) -> None:
        self._entries[node] = LivenessEntry(last_heartbeat=t)

    def nodes(self) -> list[int]:
        return sorted(self._entries)

    def heartbeat(self, node: int, t: int) -> bool:
        """Record liveness evidence; returns True when an offline node came back."""
        entry = self._entries.get(node)
        if entry is None:
            self.track(node, t)
            return False
        returned = entry.state is NodeState.OFFLINE
        entry.last_heartbeat = max(entry.last_heartbeat, t)
        entry.state = NodeState.ALIVE
        return returned

    def check(self, t: int) -> list[int]:
        """Advance states to ``t``; returns nodes that became offline just now."""
        newly_offline = []
        for node in sorted(self._entries):
            entry = self._entries[node]
            silent = t - entry.last_heartbeat
            if silent > self.offline_timeout:
                if entry.state is not NodeState.OFFLINE:
                    entry.state = NodeState.OFFLINE
                    newly_offline.append(node)
            elif silent > self.suspect_after and entry.state is NodeState.ALIVE:
                entry.state = NodeState.SUSPECT
        return newly_offline

    def state(self, node: int) -> NodeState:
        entry = self._entries.get(node)
        return entry.state if entry is not None else NodeState.OFFLINE

    def last_heartbeat(self, node: int) -> int | None:
        entry = self._entries.get(node)
        return entry.last_heartbeat if entry is not None else None

    def is_alive(self, node: int) -> bool:
        return self.state(node) is not NodeState.OFFLINE

    def snapshot(self) -> dict[int, NodeState]:
        return {node: e.state for node, e in sorted(self._entries.items())}
