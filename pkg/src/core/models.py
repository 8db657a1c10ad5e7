from dataclasses import dataclass, field


@dataclass
class TransmissionRecord:
    sender: int
    length: int  # frame bytes on air
    start: int  # µs
    end: int  # µs, start + airtime
    spreading_factor: int
    frequency_hz: int
    wire: bytes = field(default=b"", repr=False)
    rssi: dict[int, float] = field(default_factory=dict)  # receiver -> dBm
    delivered_to: list[int] = field(default_factory=list)
    collided: bool = False  # lost at one or more receivers because of overlap

    @property
    def airtime(self) -> int:
        return self.end - self.start

    def overlaps(self, other: "TransmissionRecord") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass
class LatencyRecord:
    source: int
    sequence: int
    origin_timestamp: int  # µs
    ingest_timestamp: int  # µs

    @property
    def latency(self) -> int:
        return self.ingest_timestamp - self.origin_timestamp


@dataclass
class FailoverRecord:
    service: str
    from_node: int
    to_node: int
    outage_start: int  # µs, when the service stopped running anywhere
    detected_at: int  # µs, when the executing node committed the redeploy
    start_time: int  # µs, container start-up duration
    completed_at: int  # µs

    @property
    def detection_delay(self) -> int:
        return self.detected_at - self.outage_start

    @property
    def total(self) -> int:
        return self.detection_delay + self.start_time


@dataclass
class BundleRecord:
    bundle_id: str
    publisher: int
    node: int
    size_bytes: int
    frames: int
    published_at: int  # µs
    applied_at: int | None = None
    outcome: str = "pending"  # pending | applied | duplicate | rejected | lost

    @property
    def latency(self) -> int | None:
        if self.applied_at is None:
            return None
        return self.applied_at - self.published_at
