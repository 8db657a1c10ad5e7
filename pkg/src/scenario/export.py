import csv
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Iterable

from .summary import RunSummary

if TYPE_CHECKING:
    from .runner import RunResult

logger = logging.getLogger("loraheal")

LATENCY_COLS = ["source", "sequence", "origin_us", "ingest_us", "latency_us"]
TRANSMISSION_COLS = ["sender", "start_us", "end_us", "bytes", "delivered_to", "collided"]
FAILOVER_COLS = ["detect_us", "start_us", "total_us", "service", "from", "to"]
BUNDLE_COLS = [
    "bundle_id", "publisher", "node", "bytes", "frames",
    "published_us", "applied_us", "latency_us", "outcome",
]
EVENT_COLS = ["fire_us", "sequence", "target", "label"]


def _write_csv(path: Path, columns: list[str], rows: Iterable[dict]) -> int:
    count = 0
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow(row)
            count += 1
    return count


def latency_rows(result: "RunResult"):
    for r in result.latencies:
        yield {
            "source": r.source,
            "sequence": r.sequence,
            "origin_us": r.origin_timestamp,
            "ingest_us": r.ingest_timestamp,
            "latency_us": r.latency,
        }


def transmission_rows(result: "RunResult"):
    for r in result.transmissions:
        yield {
            "sender": r.sender,
            "start_us": r.start,
            "end_us": r.end,
            "bytes": r.length,
            "delivered_to": ";".join(str(n) for n in r.delivered_to),
            "collided": int(r.collided),
        }


def failover_rows(result: "RunResult"):
    for r in result.failovers:
        yield {
            "detect_us": r.detection_delay,
            "start_us": r.start_time,
            "total_us": r.total,
            "service": r.service,
            "from": r.from_node,
            "to": r.to_node,
        }


def bundle_rows(result: "RunResult"):
    for r in result.bundles:
        yield {
            "bundle_id": r.bundle_id,
            "publisher": r.publisher,
            "node": r.node,
            "bytes": r.size_bytes,
            "frames": r.frames,
            "published_us": r.published_at,
            "applied_us": "" if r.applied_at is None else r.applied_at,
            "latency_us": "" if r.latency is None else r.latency,
            "outcome": r.outcome,
        }


def write_run(result: "RunResult", summary: RunSummary, out_dir: Path) -> dict[str, Path]:
    """Write every output of one run into ``out_dir``; returns name -> path."""
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "latency": out_dir / "latency.csv",
        "transmissions": out_dir / "transmissions.csv",
        "failover": out_dir / "failover.csv",
        "bundles": out_dir / "bundles.csv",
        "timeseries": out_dir / "timeseries.lp",
        "summary": out_dir / "summary.json",
    }
    counts = {
        "latency": _write_csv(paths["latency"], LATENCY_COLS, latency_rows(result)),
        "transmissions": _write_csv(paths["transmissions"], TRANSMISSION_COLS, transmission_rows(result)),
        "failover": _write_csv(paths["failover"], FAILOVER_COLS, failover_rows(result)),
        "bundles": _write_csv(paths["bundles"], BUNDLE_COLS, bundle_rows(result)),
    }
    result.store.write(paths["timeseries"])
    summary.write(paths["summary"])
    if result.events:
        paths["events"] = out_dir / "events.csv"
        counts["events"] = _write_csv(
            paths["events"],
            EVENT_COLS,
            ({"fire_us": e[0], "sequence": e[1], "target": e[2], "label": e[3]} for e in result.events),
        )
    for name, count in counts.items():
        logger.info(f"[scenario] {paths[name].name:<18} ({count} rows)")
    return paths
