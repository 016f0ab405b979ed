"""Config-driven experiment suites producing pass/fail reports."""
from __future__ import annotations

from .config import EXPERIMENTS, ConfigError, ExperimentConfig, dump_config, load_config
from .report import Claim, Report, SuiteResult, format_report
from .runner import ExperimentError, run, run_suite

__all__ = [
    "EXPERIMENTS", "ConfigError", "ExperimentConfig", "dump_config", "load_config",
    "Claim", "Report", "SuiteResult", "format_report", "ExperimentError", "run", "run_suite",
]
