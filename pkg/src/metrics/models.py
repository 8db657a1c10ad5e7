import json
from dataclasses import asdict, dataclass, field
from enum import Enum

MAX_HOPS = 4
DEFAULT_PAYLOAD_BYTES = 512

PacketKey = tuple[int, int]  # (source, sequence)


class MetricsError(ValueError):
    pass


@dataclass
class MetricsPacket:
    source: int
    sequence: int
    origin_timestamp: int  # µs, set when sampled
    cpu_percent: float
    memory_percent: float
    running_services: list[str] = field(default_factory=list)
    hops: int = 0
    detail: str = ""  # container status text, also pads the packet to its nominal size

    @property
    def key(self) -> PacketKey:
        return (self.source, self.sequence)

    def encode(self, pad_to: int = 0) -> bytes:
        body = asdict(self)
        body["detail"] = ""
        raw = json.dumps(body, separators=(",", ":"), sort_keys=True).encode("ascii")
        if len(raw) < pad_to:
            body["detail"] = "." * (pad_to - len(raw))
            raw = json.dumps(body, separators=(",", ":"), sort_keys=True).encode("ascii")
        return raw

    @classmethod
    def decode(cls, raw: bytes) -> "MetricsPacket":
        try:
            body = json.loads(raw)
            return cls(**body)
        except (ValueError, TypeError) as e:
            raise MetricsError(f"bad metrics packet: {e}") from None

    def forwarded(self) -> "MetricsPacket":
        return MetricsPacket(
            self.source,
            self.sequence,
            self.origin_timestamp,
            self.cpu_percent,
            self.memory_percent,
            list(self.running_services),
            self.hops + 1,
            self.detail,
        )


class PacketOutcome(Enum):
    IN_FLIGHT = "in_flight"
    INGESTED = "ingested"
    LOST = "lost"


class MetricsLedger:
    """Fate of every sampled packet across the whole cluster.

    A packet reported lost can still be ingested later (a forward that got
    through although its ACK never came back); ingestion wins.
    """

    def __init__(self):
        self._outcomes: dict[PacketKey, PacketOutcome] = {}

    def sampled(self, key: PacketKey) -> None:
        self._outcomes.setdefault(key, PacketOutcome.IN_FLIGHT)

    def ingested(self, key: PacketKey) -> None:
        self._outcomes[key] = PacketOutcome.INGESTED

    def lost(self, key: PacketKey) -> None:
        if self._outcomes.get(key) is PacketOutcome.IN_FLIGHT:
            self._outcomes[key] = PacketOutcome.LOST

    def outcome(self, key: PacketKey) -> PacketOutcome | None:
        return self._outcomes.get(key)

    def count(self, outcome: PacketOutcome) -> int:
        return sum(1 for o in self._outcomes.values() if o is outcome)

    @property
    def sampled_count(self) -> int:
        return len(self._outcomes)

    @property
    def ingested_count(self) -> int:
        return self.count(PacketOutcome.INGESTED)

    @property
    def lost_count(self) -> int:
        return self.count(PacketOutcome.LOST)

    @property
    def in_flight_count(self) -> int:
        return self.count(PacketOutcome.IN_FLIGHT)
