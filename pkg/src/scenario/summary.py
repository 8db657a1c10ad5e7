import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import pandas as pd

from src.radio.duty_cycle import max_window_airtime

if TYPE_CHECKING:
    from .runner import RunResult


class IncompatibleRunsError(ValueError):
    pass


@dataclass
class LatencyStats:
    count: int = 0
    median_us: float = 0.0
    p95_us: float = 0.0
    max_us: float = 0.0
    spikes: int = 0


@dataclass
class RunSummary:
    scenario: str
    seed: int
    duration_us: int
    node_count: int
    per_node: dict[int, LatencyStats]
    aggregate: LatencyStats
    spike_threshold_us: float
    sampled: int
    ingested: int
    lost: int
    in_flight: int
    delivery_ratio: float
    retransmissions: int
    collisions: int
    duty_cycle_peak: float  # busiest node's peak airtime share of one window
    duty_cycle_peak_us: dict[int, int]
    failovers: list[dict] = field(default_factory=list)
    ownership_violations: int = 0
    unplaced: list[str] = field(default_factory=list)
    bundles: dict[str, int] = field(default_factory=dict)
    versions_converged: bool = True
    counters: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["per_node"] = {str(k): v for k, v in data["per_node"].items()}
        data["duty_cycle_peak_us"] = {str(k): v for k, v in data["duty_cycle_peak_us"].items()}
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunSummary":
        data = dict(data)
        data["per_node"] = {int(k): LatencyStats(**v) for k, v in data["per_node"].items()}
        data["aggregate"] = LatencyStats(**data["aggregate"])
        data["duty_cycle_peak_us"] = {int(k): v for k, v in data["duty_cycle_peak_us"].items()}
        return cls(**data)

    def write(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")


def load_summary(path: str | Path) -> RunSummary:
    with open(path) as f:
        return RunSummary.from_dict(json.load(f))


def _stats(latencies: pd.Series, threshold: float) -> LatencyStats:
    if latencies.empty:
        return LatencyStats()
    return LatencyStats(
        count=int(latencies.size),
        median_us=round(float(latencies.median()), 3),
        p95_us=round(float(latencies.quantile(0.95)), 3),
        max_us=round(float(latencies.max()), 3),
        spikes=int((latencies > threshold).sum()),
    )


def latency_frame(result: "RunResult") -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "source": r.source,
                "sequence": r.sequence,
                "origin_us": r.origin_timestamp,
                "ingest_us": r.ingest_timestamp,
                "latency_us": r.latency,
            }
            for r in result.latencies
        ],
        columns=["source", "sequence", "origin_us", "ingest_us", "latency_us"],
    )


def summarize(result: "RunResult", spike_factor: float = 1.5) -> RunSummary:
    """Latency bands per node and overall, plus delivery, radio and failover
    counters. A spike is any latency above ``spike_factor`` times the median
    of the whole run."""
    config = result.config
    df = latency_frame(result)
    median = float(df["latency_us"].median()) if not df.empty else 0.0
    threshold = spike_factor * median

    per_node = {
        int(source): _stats(group["latency_us"], threshold)
        for source, group in df.groupby("source", sort=True)
    }
    aggregate = _stats(df["latency_us"], threshold)

    ledger = result.ledger
    settled = ledger.ingested_count + ledger.lost_count
    delivery = ledger.ingested_count / settled if settled else 1.0

    window = config.duty_cycle.window
    peaks = max_window_airtime(result.transmissions, window)
    duty_peak = max(peaks.values(), default=0) / window

    failovers = [
        {
            "service": r.service,
            "from": r.from_node,
            "to": r.to_node,
            "detect_us": r.detection_delay,
            "start_us": r.start_time,
            "total_us": r.total,
        }
        for r in result.failovers
    ]

    versions = {result.file_versions[n] for n in result.alive_nodes}
    return RunSummary(
        scenario=config.name,
        seed=config.seed,
        duration_us=config.duration,
        node_count=len(config.nodes),
        per_node=per_node,
        aggregate=aggregate,
        spike_threshold_us=round(threshold, 3),
        sampled=ledger.sampled_count,
        ingested=ledger.ingested_count,
        lost=ledger.lost_count,
        in_flight=ledger.in_flight_count,
        delivery_ratio=round(delivery, 6),
        retransmissions=result.retransmissions,
        collisions=sum(1 for r in result.transmissions if r.collided),
        duty_cycle_peak=round(duty_peak, 6),
        duty_cycle_peak_us={int(k): int(v) for k, v in sorted(peaks.items())},
        failovers=failovers,
        ownership_violations=len(result.violations),
        unplaced=list(result.unplaced),
        bundles=dict(sorted(Counter(b.outcome for b in result.bundles).items())),
        versions_converged=len(versions) <= 1,
        counters=dict(result.counters),
    )


def compare_runs(a: RunSummary, b: RunSummary) -> dict:
    """Signed deltas ``a - b`` of the headline numbers of two runs."""
    if a.duration_us != b.duration_us:
        raise IncompatibleRunsError(
            f"durations differ: {a.duration_us / 1e6:g}s vs {b.duration_us / 1e6:g}s"
        )
    if a.node_count != b.node_count:
        raise IncompatibleRunsError(f"node counts differ: {a.node_count} vs {b.node_count}")
    common = sorted(set(a.per_node) & set(b.per_node))
    return {
        "a": a.scenario,
        "b": b.scenario,
        "median_us": round(a.aggregate.median_us - b.aggregate.median_us, 3),
        "p95_us": round(a.aggregate.p95_us - b.aggregate.p95_us, 3),
        "max_us": round(a.aggregate.max_us - b.aggregate.max_us, 3),
        "spikes": a.aggregate.spikes - b.aggregate.spikes,
        "delivery_ratio": round(a.delivery_ratio - b.delivery_ratio, 6),
        "collisions": a.collisions - b.collisions,
        "retransmissions": a.retransmissions - b.retransmissions,
        "duty_cycle_peak": round(a.duty_cycle_peak - b.duty_cycle_peak, 6),
        "per_node_median_us": {
            n: round(a.per_node[n].median_us - b.per_node[n].median_us, 3) for n in common
        },
    }
