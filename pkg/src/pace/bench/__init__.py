"""Benchmark harness: desk-scale latency experiments with CSV output."""

from .config import BenchConfig, ConfigError, load_config
from .stats import LatencyStats
from .scenarios import SCENARIOS, run_scenario

__all__ = ["BenchConfig", "ConfigError", "LatencyStats", "SCENARIOS",
           "load_config", "run_scenario"]
