"""Scenario generation, closed-loop execution, metrics and the local replanning benchmark."""

from .bench import BenchConfig, run_bench, run_trial
from .coverage import CoverageLedger, deposit_coverage
from .metrics import ExecutionLog, MetricThresholds, MetricsReport, compute_metrics
from .runner import SimConfig, build_plan, replay_metrics, run_baseline, run_shift
from .scenario import ConfigError, ScenarioSpec, generate_scenario, patch_scenario_spec

__all__ = [
    "BenchConfig", "run_bench", "run_trial", "CoverageLedger", "deposit_coverage", "ExecutionLog",
    "MetricThresholds", "MetricsReport", "compute_metrics", "SimConfig", "build_plan", "replay_metrics",
    "run_baseline", "run_shift", "ConfigError", "ScenarioSpec", "generate_scenario", "patch_scenario_spec",
]
