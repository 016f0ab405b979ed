"""Counter-based noise streams, correlated Brownian increments and initial laws.

A draw is addressed by (root_seed, path_index, lane, counter). Lanes keep the
initial-data, increment, exact-CIR and auxiliary draws of a path apart, so
changing one consumer never shifts another's numbers.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy import special

from . import _kernels_numpy as _k
from ._rngconst import LANE_AUX, LANE_CIR, LANE_INCR, LANE_INIT
from .params import GammaStationary, ModelParams

__all__ = [
    "LANE_AUX", "LANE_CIR", "LANE_INCR", "LANE_INIT", "COORD_COUNTER",
    "NoiseStream", "BrownianIncrements", "sample_increments", "increments_batch",
    "uniforms", "normals", "quantile_sample", "gamma_sample", "gamma_cloud",
    "InitialLaw", "Constant", "GammaLaw", "Uniform", "Exponential", "Samples", "as_law",
]

# initial-data counter per coordinate, independent of how many factors are simulated
COORD_COUNTER = {"R": 0, "theta": 1, "v": 2}


def _seed(seed: int) -> np.uint64:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"root seed must fit in 64 unsigned bits, got {seed}")
    return np.uint64(seed)


@dataclass(frozen=True)
class NoiseStream:
    root_seed: int
    path_index: int
    counter: int = 0
    lane: int = LANE_INCR

    def key(self) -> np.ndarray:
        return _k.stream_key(_seed(self.root_seed), self.path_index, self.lane)

    def advanced(self, n: int) -> NoiseStream:
        return replace(self, counter=self.counter + n)


@dataclass(frozen=True)
class BrownianIncrements:
    dW1: float
    dW2: float
    dW3: float
    dt: float


def uniforms(root_seed: int, paths, lane: int, counter) -> np.ndarray:
    """Vectorised uniforms in (0, 1) for many (path, counter) addresses."""
    keys = _k.stream_key(_seed(root_seed), np.asarray(paths, dtype=np.int64), lane)
    return _k.uniform(keys, np.broadcast_to(np.asarray(counter, dtype=np.int64), keys.shape))


def normals(root_seed: int, paths, lane: int, counter) -> np.ndarray:
    return _k.ndtri(uniforms(root_seed, paths, lane, counter))


def _combine(g1, g2, g3, dt: float, params: ModelParams):
    s = np.sqrt(dt)
    dw1 = s * (np.sqrt(params.rho_bar) * g1 + params.rho_theta * g2 + params.rho_v * g3)
    return dw1, s * g2, s * g3


def sample_increments(stream: NoiseStream, dt: float, params: ModelParams) -> tuple[BrownianIncrements, NoiseStream]:
    """One correlated increment triple; the returned stream is 3 draws further on.

    A stream at counter ``3*s`` yields exactly the increments the path
    simulator uses at step ``s``.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    key = stream.key()
    g = _k.ndtri(_k.uniform(np.repeat(key, 3), stream.counter + np.arange(3)))
    dw1, dw2, dw3 = _combine(g[0], g[1], g[2], dt, params)
    return BrownianIncrements(float(dw1), float(dw2), float(dw3), dt), stream.advanced(3)


def increments_batch(root_seed: int, paths, step: int, dt: float, params: ModelParams) -> np.ndarray:
    """Increments of step ``step`` for many paths, shape (n, 3) as (dW1, dW2, dW3)."""
    paths = np.asarray(paths, dtype=np.int64)
    g = [normals(root_seed, paths, LANE_INCR, 3 * step + j) for j in range(3)]
    return np.column_stack(_combine(*g, dt, params))


def quantile_sample(quantile_fn: Callable, stream: NoiseStream) -> tuple[float, NoiseStream]:
    """Push one uniform through a (generalised) inverse CDF."""
    u = _k.uniform(stream.key(), stream.counter)[0]
    return float(quantile_fn(u)), stream.advanced(1)


def gamma_sample(g: GammaStationary, stream: NoiseStream) -> tuple[float, NoiseStream]:
    counters = np.array([stream.counter], dtype=np.int64)
    x = _k.gamma_draw(g.shape, stream.key(), counters)[0]
    return float(x * g.scale), replace(stream, counter=int(counters[0]))


def gamma_cloud(g: GammaStationary, n: int, root_seed: int, lane: int = LANE_AUX) -> np.ndarray:
    """``n`` independent Gamma draws, one per path index of ``lane``."""
    keys = _k.stream_key(_seed(root_seed), np.arange(n, dtype=np.int64), lane)
    return g.scale * _k.gamma_draw(np.full(n, g.shape), keys, np.zeros(n, dtype=np.int64))


# ---- initial laws -------------------------------------------------------------


class InitialLaw:
    """A 1-D law given by its quantile function; coupled draws share the uniform."""

    def quantile(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def moment(self, p: float) -> float:
        """E[X^p] for X >= 0."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(InitialLaw):
    value: float

    def quantile(self, u):
        return np.full(np.shape(u), float(self.value))

    def moment(self, p):
        return float(self.value) ** p

    def to_dict(self):
        return {"law": "constant", "value": self.value}


@dataclass(frozen=True)
class GammaLaw(InitialLaw):
    shape: float
    scale: float

    def quantile(self, u):
        return self.scale * special.gammaincinv(self.shape, u)

    def moment(self, p):
        return float(np.exp(special.gammaln(self.shape + p) - special.gammaln(self.shape)) * self.scale**p)

    def to_dict(self):
        return {"law": "gamma", "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class Uniform(InitialLaw):
    low: float
    high: float

    def quantile(self, u):
        return self.low + (self.high - self.low) * np.asarray(u)

    def moment(self, p):
        if self.high == self.low:
            return self.low**p
        return (self.high ** (p + 1) - self.low ** (p + 1)) / ((p + 1) * (self.high - self.low))

    def to_dict(self):
        return {"law": "uniform", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class Exponential(InitialLaw):
    rate: float

    def quantile(self, u):
        return -np.log1p(-np.asarray(u)) / self.rate

    def moment(self, p):
        return float(special.gamma(p + 1.0)) / self.rate**p

    def to_dict(self):
        return {"law": "exponential", "rate": self.rate}


@dataclass(frozen=True, eq=False)
class Samples(InitialLaw):
    """Empirical law of a sample; quantile is the generalised inverse of its CDF."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.sort(np.asarray(self.values, dtype=np.float64)))

    def quantile(self, u):
        n = self.values.size
        idx = np.clip(np.ceil(np.asarray(u) * n).astype(np.int64) - 1, 0, n - 1)
        return self.values[idx]

    def moment(self, p):
        return float(np.mean(np.abs(self.values) ** p))

    def __eq__(self, other):
        return isinstance(other, Samples) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    def to_dict(self):
        return {"law": "samples", "n": int(self.values.size), "mean": float(self.values.mean())}


def as_law(x) -> InitialLaw:
    """Numbers become constants; mappings like {"law": "gamma", ...} are parsed."""
    if isinstance(x, InitialLaw):
        return x
    if isinstance(x, (int, float)):
        return Constant(float(x))
    if isinstance(x, dict):
        kind = x.get("law")
        args = {k: float(v) for k, v in x.items() if k != "law"}
        table = {"constant": Constant, "gamma": GammaLaw, "uniform": Uniform, "exponential": Exponential}
        if kind not in table:
            raise ValueError(f"unknown initial law {kind!r}")
        return table[kind](**args)
    raise TypeError(f"cannot interpret {x!r} as an initial law")
