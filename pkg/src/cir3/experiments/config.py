"""Experiment configuration: TOML or JSON with [model], [scheme], [experiment] sections."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import tomli
import tomli_w

from ..params import PRESETS, ModelParams, ParameterError, validate
from ..sde import DEFAULT_DT, DEFAULT_SCHEME, SCHEMES

EXPERIMENTS = (
    "stationary-check",
    "v-contraction",
    "theta-contraction",
    "r-contraction",
    "v-ergodic-rate",
    "moment-bounds-v",
    "moment-bounds-theta",
    "moment-bounds-r",
    "generator-residual",
    "two-factor-limit-independence",
    "three-factor-limit-independence",
)


class ConfigError(ValueError):
    """Bad configuration; ``field`` is a dotted path such as ``model.rho_theta``."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    model: ModelParams = field(default_factory=ModelParams)
    scheme: str = DEFAULT_SCHEME
    dt: float = DEFAULT_DT
    n_paths: int | None = None  # None: the experiment's own default
    root_seed: int = 0
    preset: str = "default"
    options: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        exp = {"name": self.experiment, "seed": self.root_seed, "preset": self.preset}
        if self.n_paths is not None:
            exp["n_paths"] = self.n_paths
        if self.options:
            exp["options"] = dict(self.options)
        return {"model": self.model.to_dict(), "scheme": {"name": self.scheme, "dt": self.dt}, "experiment": exp}

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        unknown = set(data) - {"model", "scheme", "experiment"}
        if unknown:
            raise ConfigError(f"unknown section(s) {sorted(unknown)}")
        exp = dict(data.get("experiment", {}))
        name = exp.pop("name", None)
        if name not in EXPERIMENTS:
            raise ConfigError(f"must be one of {list(EXPERIMENTS)}, got {name!r}", "experiment.name")
        preset = exp.pop("preset", "default")
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}", "experiment.preset")
        try:
            model = ModelParams.from_mapping({**PRESETS[preset].to_dict(), **data.get("model", {})})
            validate(model)
        except ParameterError as exc:
            raise ConfigError(str(exc), f"model.{exc.field}" if exc.field else "model") from None
        sch = dict(data.get("scheme", {}))
        scheme = sch.pop("name", DEFAULT_SCHEME)
        if scheme not in SCHEMES:
            raise ConfigError(f"must be one of {list(SCHEMES)}, got {scheme!r}", "scheme.name")
        dt = _number(sch.pop("dt", DEFAULT_DT), "scheme.dt")
        if not dt > 0.0:
            raise ConfigError("must be > 0", "scheme.dt")
        if sch:
            raise ConfigError(f"unknown key(s) {sorted(sch)}", "scheme")
        seed = exp.pop("seed", 0)
        if not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ConfigError("must be an integer in [0, 2^64)", "experiment.seed")
        n_paths = exp.pop("n_paths", None)
        if n_paths is not None and (not isinstance(n_paths, int) or n_paths < 2):
            raise ConfigError("must be an integer >= 2", "experiment.n_paths")
        options = dict(exp.pop("options", {}))
        options.update(exp)  # remaining keys are experiment options too
        return cls(name, model, scheme, dt, n_paths, seed, preset, options)

    def with_overrides(self, **changes) -> ExperimentConfig:
        return replace(self, **changes)


def _number(x, where: str) -> float:
    try:
        return float(x)
    except (TypeError, ValueError):
        raise ConfigError(f"must be a number, got {x!r}", where) from None


def load_raw(path) -> dict:
    """Parse a TOML or JSON config file into a plain dictionary."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = json.loads(text) if path.suffix.lower() == ".json" else tomli.loads(text)
    except (json.JSONDecodeError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path.name}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path.name}: top level must be a table")
    return data


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(load_raw(path))


def dump_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    data = cfg.to_dict()
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")
    else:
        path.write_text(tomli_w.dumps(data))
    return path
