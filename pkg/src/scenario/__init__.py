from .config import (
    FaultConfig,
    NodeConfig,
    OffsetConfig,
    ScenarioConfig,
    ScenarioError,
    default_layout,
    parse_duration,
    parse_scenario,
    parse_scenario_text,
)
from .presets import PRESETS, load_preset
from .summary import IncompatibleRunsError, LatencyStats, RunSummary, compare_runs, load_summary, summarize
from .runner import ClusterSimulation, RunResult, run_scenario
from .export import write_run
