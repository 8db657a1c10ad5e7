import argparse
import json
import sys
from pathlib import Path

from colorama import Fore, Style

from src.core.config import Config
from src.core.logger import format_summary_table, setup_logger
from src.scenario.config import ScenarioError, parse_duration, parse_scenario
from src.scenario.presets import PRESETS, load_preset
from src.scenario.runner import run_scenario
from src.scenario.summary import IncompatibleRunsError, compare_runs, load_summary

BANNER = f"""
{Fore.CYAN}╔══════════════════════════════════════════════════╗
║        LORAHEAL - Self-healing LoRa cluster      ║
║     Latency, duty cycle and failover simulator   ║
╚══════════════════════════════════════════════════╝{Style.RESET_ALL}
"""

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INCOMPATIBLE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loraheal", description="Simulate a LoRa edge cluster")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario and write its CSVs")
    sim.add_argument("--scenario", help="YAML scenario file")
    sim.add_argument("--preset", choices=sorted(PRESETS), help="built-in scenario")
    sim.add_argument("--seed", type=int, help="overrides the scenario seed")
    sim.add_argument("--out", help="output directory")
    sim.add_argument("--duration", help="overrides the duration, e.g. 90m or 6h")
    sim.add_argument("--trace", action="store_true", help="also write events.csv")

    cmp = sub.add_parser("compare", help="signed deltas between two summary.json files")
    cmp.add_argument("summary_a")
    cmp.add_argument("summary_b")
    return parser


def _simulate(args: argparse.Namespace, config: Config, logger) -> int:
    if bool(args.scenario) == bool(args.preset):
        logger.error("simulate needs exactly one of --scenario or --preset")
        return EXIT_CONFIG
    try:
        if args.preset:
            scenario = load_preset(args.preset, config.default_seed)
        else:
            scenario = parse_scenario(args.scenario, config.strict_config, config.default_seed)
        if args.seed is not None:
            if args.seed < 0:
                raise ScenarioError("--seed must be non-negative")
            scenario = scenario.with_overrides(seed=args.seed)
        if args.duration is not None:
            try:
                duration = parse_duration(args.duration)
            except ValueError as e:
                raise ScenarioError(f"--duration: {e}") from None
            if duration <= 0:
                raise ScenarioError("--duration must be positive")
            scenario = scenario.with_overrides(duration=duration)
    except ScenarioError as e:
        print(f"{Fore.RED}Scenario error: {e}{Style.RESET_ALL}")
        return EXIT_CONFIG

    outputs = scenario.outputs
    out_dir = args.out or outputs.directory or str(
        Path(config.output_dir) / f"{scenario.name}-seed{scenario.seed}"
    )
    spike_factor = outputs.spike_factor or config.spike_factor
    trace = args.trace or bool(outputs.trace_events) or config.trace_events

    logger.info(f"Scenario: {Fore.YELLOW}{scenario.name}{Style.RESET_ALL} (seed {scenario.seed})")
    logger.info(
        f"Radio: SF{scenario.radio.spreading_factor} / {scenario.radio.bandwidth_hz // 1000} kHz / "
        f"CR 4/{scenario.radio.coding_rate_denominator} / {scenario.radio.tx_power_dbm} dBm"
    )
    logger.info(f"Metric interval: {scenario.metric_interval / 60e6:g} min, offsets {scenario.start_offsets.mode}")
    logger.info(f"Output: {out_dir}")

    summary = run_scenario(scenario, out_dir, spike_factor, trace)
    print(format_summary_table(summary))
    for row in summary.failovers:
        logger.info(
            f"  failover {row['service']}: n{row['from']} -> n{row['to']} "
            f"detect {row['detect_us'] / 1e6:.1f}s + start {row['start_us'] / 1e6:.2f}s"
        )
    if summary.ownership_violations:
        logger.warning(f"{summary.ownership_violations} single-owner violations in this run")
    return EXIT_OK


def _compare(args: argparse.Namespace, logger) -> int:
    try:
        a = load_summary(args.summary_a)
        b = load_summary(args.summary_b)
    except (OSError, ValueError, KeyError, TypeError) as e:
        print(f"{Fore.RED}Cannot read summary: {e}{Style.RESET_ALL}")
        return EXIT_CONFIG
    try:
        deltas = compare_runs(a, b)
    except IncompatibleRunsError as e:
        print(f"{Fore.RED}Incompatible runs: {e}{Style.RESET_ALL}")
        return EXIT_INCOMPATIBLE
    print(json.dumps(deltas, indent=2, sort_keys=True))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = Config.from_env()
    except ValueError as e:
        print(f"{Fore.RED}Config error: {e}{Style.RESET_ALL}")
        return EXIT_CONFIG

    logger = setup_logger(config.log_level)
    if args.command == "simulate":
        print(BANNER)
        return _simulate(args, config, logger)
    return _compare(args, logger)


if __name__ == "__main__":
    sys.exit(main())
