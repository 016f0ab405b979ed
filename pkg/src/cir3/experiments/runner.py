"""Run single experiments and suites."""
from __future__ import annotations

import time
from typing import Iterable

import numba
import numpy as np
import scipy

from .. import __version__, _accel
from ..params import ParameterError
from .config import ExperimentConfig
from .plans import PLANS, Context
from .report import Report, SuiteResult


class ExperimentError(RuntimeError):
    """A module error raised inside an experiment, tagged with the experiment name."""

    def __init__(self, experiment: str, cause: Exception, partial: Report | None = None):
        super().__init__(f"{experiment}: {type(cause).__name__}: {cause}")
        self.experiment = experiment
        self.cause = cause
        self.partial = partial


def versions() -> dict:
    return {"cir3": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "backend": _accel.BACKEND}


def run(cfg: ExperimentConfig, threads: int | None = None, save_ensembles: bool = False) -> Report:
    """Run one experiment; the report is deterministic for a fixed config and seed."""
    report = Report(cfg.experiment, cfg.to_dict(), versions=versions())
    ctx = Context(cfg, report, threads, save_ensembles)
    start = time.perf_counter()
    try:
        PLANS[cfg.experiment](ctx)
    except ParameterError:
        raise
    except Exception as exc:
        raise ExperimentError(cfg.experiment, exc, report) from exc
    report.wall_clock = time.perf_counter() - start
    report.config["resolved"] = dict(sorted(ctx.resolved.items()))
    return report


def run_suite(configs: Iterable[ExperimentConfig], threads: int | None = None,
              save_ensembles: bool = False) -> SuiteResult:
    """Run configs in order; the first hard error propagates with the partial suite attached."""
    reports: list[Report] = []
    for cfg in configs:
        try:
            reports.append(run(cfg, threads, save_ensembles))
        except ExperimentError as exc:
            exc.partial_suite = SuiteResult(reports)
            raise
    return SuiteResult(reports)
