#!/usr/bin/env python3
"""
Análisis de una corrida del simulador a partir de sus CSVs.

Lee latency.csv, transmissions.csv, failover.csv y bundles.csv de un
directorio de salida y produce:
  1. Bandas de latencia por nodo (buckets de 10 s)
  2. Spikes por hora
  3. Uso de radio por nodo (frames, airtime, colisiones)
  4. Tabla de failover
  5. Sincronización de bundles

Uso:
  python scripts/analyze.py data/runs/baseline-4-node-seed1
"""

import csv
import sys
from collections import defaultdict
from pathlib import Path

import pandas as pd

PROJECT_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_RUN = PROJECT_ROOT / "data" / "runs" / "baseline-4-node-seed1"
BAND_WIDTH_S = 10
SPIKE_FACTOR = 1.5


# ── Data loading ─────────────────────────────────────────────────────────────

def load_csv(run_dir, name):
    path = run_dir / name
    if not path.exists():
        return []
    with open(path) as f:
        return list(csv.DictReader(f))


def safe_int(val, default=0):
    try:
        return int(val)
    except (TypeError, ValueError):
        return default


def median(values):
    if not values:
        return 0.0
    return float(pd.Series(values, dtype="float64").median())


# ── Section helpers ──────────────────────────────────────────────────────────

def section(title):
    print(f"\n{'='*70}")
    print(f"  {title}")
    print(f"{'='*70}")


def subsection(title):
    print(f"\n  --- {title} ---")


# ── 1. Latency bands ─────────────────────────────────────────────────────────

def analyze_bands(latency):
    section("1. LATENCY BANDS PER NODE")
    if not latency:
        print("  No ingested packets.")
        return

    by_node = defaultdict(list)
    for row in latency:
        by_node[safe_int(row["source"])].append(safe_int(row["latency_us"]) / 1e6)

    for node in sorted(by_node):
        values = by_node[node]
        subsection(f"node {node}  (n={len(values)}, median {median(values):.2f}s)")
        bands = defaultdict(int)
        for v in values:
            bands[int(v // BAND_WIDTH_S)] += 1
        for band in sorted(bands):
            lo = band * BAND_WIDTH_S
            share = bands[band] / len(values)
            bar = "#" * max(1, round(share * 40))
            print(f"  {lo:>4d}–{lo + BAND_WIDTH_S:<4d}s  {bands[band]:4d}  {share:6.1%}  {bar}")


# ── 2. Spikes ────────────────────────────────────────────────────────────────

def analyze_spikes(latency):
    section(f"2. SPIKES (latency > {SPIKE_FACTOR} x run median)")
    if not latency:
        print("  No ingested packets.")
        return

    values = [safe_int(r["latency_us"]) for r in latency]
    threshold = SPIKE_FACTOR * median(values)
    by_hour = defaultdict(lambda: [0, 0])
    for row in latency:
        hour = safe_int(row["origin_us"]) // 3_600_000_000
        by_hour[hour][0] += 1
        if safe_int(row["latency_us"]) > threshold:
            by_hour[hour][1] += 1

    print(f"\n  Threshold: {threshold / 1e6:.2f}s")
    print(f"\n  {'Hour':>5s}  {'N':>5s}  {'Spikes':>7s}  {'Rate':>6s}")
    print(f"  {'-'*5}  {'-'*5}  {'-'*7}  {'-'*6}")
    for hour in sorted(by_hour):
        n, spikes = by_hour[hour]
        print(f"  {hour:5d}  {n:5d}  {spikes:7d}  {spikes / n:6.1%}")


# ── 3. Radio usage ───────────────────────────────────────────────────────────

def analyze_radio(transmissions):
    section("3. RADIO USAGE PER NODE")
    if not transmissions:
        print("  No transmissions recorded.")
        return

    frames = defaultdict(int)
    airtime = defaultdict(int)
    collided = defaultdict(int)
    end = 0
    for row in transmissions:
        node = safe_int(row["sender"])
        frames[node] += 1
        airtime[node] += safe_int(row["end_us"]) - safe_int(row["start_us"])
        collided[node] += safe_int(row["collided"])
        end = max(end, safe_int(row["end_us"]))

    hours = max(end / 3.6e9, 1e-9)
    print(f"\n  {'Node':>5s}  {'Frames':>7s}  {'Airtime s':>10s}  {'s/hour':>7s}  {'Collided':>9s}")
    print(f"  {'-'*5}  {'-'*7}  {'-'*10}  {'-'*7}  {'-'*9}")
    for node in sorted(frames):
        air_s = airtime[node] / 1e6
        print(f"  {node:5d}  {frames[node]:7d}  {air_s:10.2f}  {air_s / hours:7.2f}  {collided[node]:9d}")


# ── 4. Failover ──────────────────────────────────────────────────────────────

def analyze_failover(failover):
    section("4. FAILOVER")
    if not failover:
        print("  No failovers.")
        return

    print(f"\n  {'Service':>10s}  {'From':>4s}  {'To':>4s}  {'Detect s':>9s}  {'Start s':>8s}  {'Total s':>8s}")
    print(f"  {'-'*10}  {'-'*4}  {'-'*4}  {'-'*9}  {'-'*8}  {'-'*8}")
    for row in failover[:40]:
        print(
            f"  {row['service']:>10s}  {row['from']:>4s}  {row['to']:>4s}  "
            f"{safe_int(row['detect_us']) / 1e6:9.2f}  {safe_int(row['start_us']) / 1e6:8.2f}  "
            f"{safe_int(row['total_us']) / 1e6:8.2f}"
        )
    if len(failover) > 40:
        print(f"  ... {len(failover) - 40} more")

    subsection("Start time by service")
    by_service = defaultdict(list)
    for row in failover:
        by_service[row["service"]].append(safe_int(row["start_us"]) / 1e6)
    for service in sorted(by_service):
        values = by_service[service]
        print(f"  {service:>10s}  n={len(values):3d}  min {min(values):.2f}s  "
              f"median {median(values):.2f}s  max {max(values):.2f}s")


# ── 5. Bundles ───────────────────────────────────────────────────────────────

def analyze_bundles(bundles):
    section("5. BUNDLE SYNC")
    if not bundles:
        print("  No bundles published.")
        return

    outcomes = defaultdict(int)
    for row in bundles:
        outcomes[row["outcome"]] += 1
    for outcome in sorted(outcomes):
        print(f"  {outcome:<10s} {outcomes[outcome]:4d}")

    applied = [safe_int(r["latency_us"]) / 1e6 for r in bundles if r["latency_us"]]
    if applied:
        print(f"\n  Apply latency: median {median(applied):.1f}s, max {max(applied):.1f}s")


def main():
    run_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else DEFAULT_RUN
    print("=" * 70)
    print("  LORAHEAL RUN ANALYSIS")
    print("=" * 70)
    print(f"\n  Run dir: {run_dir}")

    latency = load_csv(run_dir, "latency.csv")
    transmissions = load_csv(run_dir, "transmissions.csv")
    failover = load_csv(run_dir, "failover.csv")
    bundles = load_csv(run_dir, "bundles.csv")

    print(f"  Latency rows:       {len(latency)}")
    print(f"  Transmission rows:  {len(transmissions)}")
    print(f"  Failover rows:      {len(failover)}")
    print(f"  Bundle rows:        {len(bundles)}")

    analyze_bands(latency)
    analyze_spikes(latency)
    analyze_radio(transmissions)
    analyze_failover(failover)
    analyze_bundles(bundles)

    print(f"\n{'='*70}")
    print("  ANALYSIS COMPLETE")
    print(f"{'='*70}\n")


if __name__ == "__main__":
    main()
