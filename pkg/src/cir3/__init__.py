"""Simulation and verification toolkit for a three-factor CIR system."""
from __future__ import annotations

__version__ = "0.1.0"

from ._accel import BACKEND, set_threads  # noqa: E402
from .params import ModelParams, PRESETS, stationary_gamma, validate  # noqa: E402

__all__ = ["BACKEND", "ModelParams", "PRESETS", "__version__", "set_threads", "stationary_gamma", "validate"]
