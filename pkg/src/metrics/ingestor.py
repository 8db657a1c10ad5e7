import logging
from pathlib import Path

from src.core.models import LatencyRecord

from .models import MetricsPacket, PacketKey

logger = logging.getLogger("loraheal")


def format_line(packet: MetricsPacket, record: LatencyRecord, ingest_node: int) -> str:
    services = ";".join(packet.running_services)
    return (
        f"metrics,node={packet.source},seq={packet.sequence},ingestor={ingest_node} "
        f'cpu={packet.cpu_percent:.2f},mem={packet.memory_percent:.2f},'
        f'services="{services}",latency_us={record.latency}i '
        f"{packet.origin_timestamp * 1000}"
    )


class TimeSeriesStore:
    """Append-only metrics database, written by whichever node hosts the
    ingestor service at the time."""

    def __init__(self):
        self.records: list[LatencyRecord] = []
        self.lines: list[str] = []
        self._seen: set[PacketKey] = set()
        self.duplicates = 0

    def __len__(self) -> int:
        return len(self.records)

    def ingest(self, packet: MetricsPacket, t_arrival: int, ingest_node: int) -> LatencyRecord | None:
        if packet.key in self._seen:
            self.duplicates += 1
            logger.debug(
                f"[metrics] duplicate packet n{packet.source}#{packet.sequence} dropped at n{ingest_node}"
            )
            return None
        if t_arrival < packet.origin_timestamp:
            raise ValueError(
                f"packet n{packet.source}#{packet.sequence} arrived before it was sampled"
            )
        self._seen.add(packet.key)
        record = LatencyRecord(packet.source, packet.sequence, packet.origin_timestamp, t_arrival)
        self.records.append(record)
        self.lines.append(format_line(packet, record, ingest_node))
        return record

    def write(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as f:
            for line in self.lines:
                f.write(line + "\n")
