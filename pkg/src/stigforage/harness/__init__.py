from .config import MatrixConfig, parse_settings, read_settings
from .outputs import aggregate, aggregate_csv, emit_outputs, load_runs
from .runner import RunOptions, RunRecord, TimingRecord, bench, measure_runtime, run_experiment, run_scenario
from .scenarios import ScenarioSpec, ScenarioType, build_scenario, draw_wipeouts, gen_scenarios, load_scenario

__all__ = [
    "MatrixConfig",
    "RunOptions",
    "RunRecord",
    "ScenarioSpec",
    "ScenarioType",
    "TimingRecord",
    "aggregate",
    "aggregate_csv",
    "bench",
    "build_scenario",
    "draw_wipeouts",
    "emit_outputs",
    "gen_scenarios",
    "load_runs",
    "load_scenario",
    "measure_runtime",
    "parse_settings",
    "read_settings",
    "run_experiment",
    "run_scenario",
]
