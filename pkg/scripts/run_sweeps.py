#!/usr/bin/env python3
"""
Barrido de presets sobre varias semillas y reporte de tendencias.

Corre cada preset de latencia con N semillas, agrega los resúmenes con
pandas y compara cada variante contra baseline-4-node:
  1. Tabla por preset (mediana, p95, spikes, entrega, colisiones)
  2. Deltas contra el baseline (promedio sobre semillas)
  3. Failover por tamaño de imagen (si se incluye failover-imagesize)

Uso:
  python scripts/run_sweeps.py                 # 3 semillas, 6 h
  python scripts/run_sweeps.py 5 90m           # 5 semillas, 90 min
"""

import sys
from pathlib import Path

import pandas as pd

PROJECT_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from src.core.logger import setup_logger  # noqa: E402
from src.scenario.config import parse_duration  # noqa: E402
from src.scenario.presets import load_preset  # noqa: E402
from src.scenario.runner import run_scenario  # noqa: E402

OUT_DIR = PROJECT_ROOT / "data" / "sweeps"
BASELINE = "baseline-4-node"
LATENCY_PRESETS = [
    BASELINE,
    "baseline-5-node",
    "sync-start-4-node",
    "interval-10min",
    "bw-500k",
    "cr-4-8",
    "power-5dbm",
    "backoff-4-node",
]
FAILOVER_PRESET = "failover-imagesize"


# ── Section helpers ──────────────────────────────────────────────────────────

def section(title):
    print(f"\n{'='*70}")
    print(f"  {title}")
    print(f"{'='*70}")


# ── Runs ─────────────────────────────────────────────────────────────────────

def run_grid(presets, seeds, duration):
    rows = []
    failovers = []
    for name in presets:
        for seed in seeds:
            config = load_preset(name, seed)
            if duration is not None:
                config = config.with_overrides(duration=duration)
            summary = run_scenario(config, OUT_DIR / f"{name}-seed{seed}")
            rows.append({
                "preset": name,
                "seed": seed,
                "median_s": summary.aggregate.median_us / 1e6,
                "p95_s": summary.aggregate.p95_us / 1e6,
                "max_s": summary.aggregate.max_us / 1e6,
                "spikes": summary.aggregate.spikes,
                "delivery": summary.delivery_ratio,
                "collisions": summary.collisions,
                "retx": summary.retransmissions,
                "duty_peak": summary.duty_cycle_peak,
            })
            for fo in summary.failovers:
                failovers.append({"seed": seed, **fo})
    return pd.DataFrame(rows), pd.DataFrame(failovers)


# ── 1. Per preset ────────────────────────────────────────────────────────────

def report_presets(df):
    section("1. LATENCY PER PRESET (mean over seeds)")
    table = df.groupby("preset", sort=False).agg(
        median_s=("median_s", "mean"),
        p95_s=("p95_s", "mean"),
        spikes=("spikes", "sum"),
        delivery=("delivery", "mean"),
        collisions=("collisions", "sum"),
        retx=("retx", "sum"),
        duty_peak=("duty_peak", "max"),
    )
    print()
    print(table.to_string(float_format=lambda v: f"{v:.3f}"))


# ── 2. Deltas ────────────────────────────────────────────────────────────────

def report_deltas(df):
    section(f"2. DELTAS VS {BASELINE}")
    base = df[df["preset"] == BASELINE].set_index("seed")
    if base.empty:
        print("  Baseline not in sweep.")
        return
    cols = ["median_s", "p95_s", "spikes", "delivery", "collisions"]
    print(f"\n  {'Preset':<20s} " + " ".join(f"{c:>11s}" for c in cols))
    print(f"  {'-'*20} " + " ".join("-" * 11 for _ in cols))
    for name, group in df.groupby("preset", sort=False):
        if name == BASELINE:
            continue
        delta = group.set_index("seed")[cols] - base[cols]
        mean = delta.mean()
        print(f"  {name:<20s} " + " ".join(f"{mean[c]:>+11.3f}" for c in cols))


# ── 3. Failover ──────────────────────────────────────────────────────────────

def report_failover(fo):
    section("3. FAILOVER BY SERVICE")
    if fo.empty:
        print("  No failovers recorded.")
        return
    fo = fo.assign(detect_s=fo["detect_us"] / 1e6, start_s=fo["start_us"] / 1e6, total_s=fo["total_us"] / 1e6)
    table = fo.groupby("service").agg(
        n=("total_s", "size"),
        detect_s=("detect_s", "median"),
        start_s=("start_s", "median"),
        start_max_s=("start_s", "max"),
        total_s=("total_s", "median"),
    )
    print()
    print(table.to_string(float_format=lambda v: f"{v:.2f}"))


def main():
    n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 3
    duration = parse_duration(sys.argv[2]) if len(sys.argv) > 2 else None
    seeds = list(range(1, n_seeds + 1))
    setup_logger("WARNING")

    print("=" * 70)
    print("  LORAHEAL PRESET SWEEP")
    print("=" * 70)
    print(f"\n  Seeds:    {seeds}")
    print(f"  Duration: {'preset default' if duration is None else f'{duration / 60e6:g} min'}")
    print(f"  Output:   {OUT_DIR}")

    df, _ = run_grid(LATENCY_PRESETS, seeds, duration)
    _, fo = run_grid([FAILOVER_PRESET], seeds, duration)

    OUT_DIR.mkdir(parents=True, exist_ok=True)
    df.to_csv(OUT_DIR / "sweep.csv", index=False)

    report_presets(df)
    report_deltas(df)
    report_failover(fo)

    print(f"\n{'='*70}")
    print("  SWEEP COMPLETE")
    print(f"{'='*70}\n")


if __name__ == "__main__":
    main()
