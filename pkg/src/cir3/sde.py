"""Coefficients, one-step maps and ensemble simulation for the 1/2/3-factor systems."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _accel
from . import _kernels_numpy as _knp
from ._rngconst import LANE_INIT
from .noise import COORD_COUNTER, BrownianIncrements, Constant, InitialLaw, NoiseStream, as_law, uniforms
from .params import ModelParams, validate

if _accel.USE_NUMBA:
    from . import _kernels_numba as _kern
else:
    _kern = _knp

SCHEMES = ("euler_full_truncation", "exact_v_euler_rest")
DEFAULT_SCHEME = "exact_v_euler_rest"
DEFAULT_DT = 2.0**-7
COORDS = {1: ("v",), 2: ("theta", "v"), 3: ("R", "theta", "v")}
COUPLING_KINDS = ("v_coupling", "theta_coupling", "r_coupling")
_COUPLING_FACTORS = {"v_coupling": 1, "theta_coupling": 2, "r_coupling": 3}
# v-pairs started apart need the Gaussian (synchronous) coupling; the exact
# sampler's Poisson-Gamma draws are not monotone in the starting point
_COUPLING_SCHEME = {"v_coupling": "euler_full_truncation", "theta_coupling": DEFAULT_SCHEME, "r_coupling": DEFAULT_SCHEME}


class NonFiniteState(FloatingPointError):
    def __init__(self, path: int, step: int):
        super().__init__(f"non-finite state on path {path} at step {step}; reduce dt")
        self.path = path
        self.step = step


class CouplingPatternViolation(ValueError):
    pass


# ---- coefficients ---------------------------------------------------------------


def drift(state, params: ModelParams) -> np.ndarray:
    """b(R, theta, v); ``state`` may be a 3-vector or an (..., 3) array."""
    x = np.asarray(state, dtype=np.float64)
    r, th, v = x[..., 0], x[..., 1], x[..., 2]
    return np.stack([params.k * (th - r), params.k_theta * (params.zeta - th), params.k_v * (params.eta - v)], axis=-1)


def diffusion(state, params: ModelParams) -> np.ndarray:
    """sigma(R, theta, v), shape (..., 3, 3); absolute values go under the roots."""
    x = np.abs(np.asarray(state, dtype=np.float64))
    r, th, v = x[..., 0], x[..., 1], x[..., 2]
    a = params.alpha * np.sqrt(v * r)
    out = np.zeros(x.shape[:-1] + (3, 3))
    out[..., 0, 0] = math.sqrt(params.rho_bar) * a
    out[..., 0, 1] = params.rho_theta * a
    out[..., 0, 2] = params.rho_v * a
    out[..., 1, 1] = params.alpha * params.beta * np.sqrt(v * th)
    out[..., 2, 2] = params.gamma * np.sqrt(v)
    return out


def drift_theta(state, params: ModelParams) -> np.ndarray:
    x = np.asarray(state, dtype=np.float64)
    return np.stack([params.k_theta * (params.zeta - x[..., 0]), params.k_v * (params.eta - x[..., 1])], axis=-1)


def diffusion_theta(state, params: ModelParams) -> np.ndarray:
    x = np.abs(np.asarray(state, dtype=np.float64))
    th, v = x[..., 0], x[..., 1]
    out = np.zeros(x.shape[:-1] + (2, 2))
    out[..., 0, 0] = params.alpha * params.beta * np.sqrt(v * th)
    out[..., 1, 1] = params.gamma * np.sqrt(v)
    return out


# ---- one-step maps --------------------------------------------------------------


def step_euler_full_truncation(state, dt: float, incr: BrownianIncrements, params: ModelParams) -> np.ndarray:
    """Euler step with coefficients at positive parts, then clamp at zero."""
    x = np.asarray(state, dtype=np.float64)
    xp = np.maximum(x, 0.0)
    r, th, v = xp[..., 0], xp[..., 1], xp[..., 2]
    out = np.stack([
        r + params.k * (th - r) * dt + params.alpha * np.sqrt(v * r) * incr.dW1,
        th + params.k_theta * (params.zeta - th) * dt + params.alpha * params.beta * np.sqrt(v * th) * incr.dW2,
        v + params.k_v * (params.eta - v) * dt + params.gamma * np.sqrt(v) * incr.dW3,
    ], axis=-1)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState(path=-1, step=-1)
    return np.maximum(out, 0.0)


def step_cir_exact(v: float, dt: float, params: ModelParams, stream: NoiseStream) -> tuple[float, NoiseStream]:
    """Draw v(t+dt) | v(t)=v from the exact noncentral chi-square transition."""
    if v < 0.0 or dt <= 0.0:
        raise ValueError("need v >= 0 and dt > 0")
    counters = np.array([stream.counter], dtype=np.int64)
    out = _knp.cir_exact(np.array([v]), dt, params.k_v, params.eta, params.gamma, stream.key(), counters)
    return float(out[0]), NoiseStream(stream.root_seed, stream.path_index, int(counters[0]), stream.lane)


# ---- ensembles ------------------------------------------------------------------


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    n_steps: int
    record_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError("dt must be > 0")
        if self.n_steps < 1 or self.record_stride < 1:
            raise ValueError("n_steps and record_stride must be >= 1")
        if self.n_steps % self.record_stride:
            raise ValueError("record_stride must divide n_steps")

    @classmethod
    def horizon(cls, T: float, dt: float = DEFAULT_DT, n_records: int | None = None) -> TimeGrid:
        """Grid reaching ``T`` (rounded to whole steps), recording about ``n_records`` times."""
        n = max(1, int(round(T / dt)))
        stride = 1
        if n_records:
            stride = max(1, n // n_records)
            while n % stride:
                stride -= 1
        return cls(dt, n, stride)

    @property
    def n_records(self) -> int:
        return self.n_steps // self.record_stride + 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_records) * (self.record_stride * self.dt)

    @property
    def T(self) -> float:
        return self.n_steps * self.dt

    def index(self, t: float) -> int:
        i = int(round(t / (self.record_stride * self.dt)))
        if not 0 <= i < self.n_records or abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} is not on the recorded grid")
        return i


@dataclass(frozen=True)
class EnsembleSpec:
    factors: int
    initial: Sequence  # one law (or number) per coordinate, in COORDS order
    grid: TimeGrid
    n_paths: int
    root_seed: int = 0
    scheme: str = DEFAULT_SCHEME
    init_states: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.factors not in COORDS:
            raise ValueError("factors must be 1, 2 or 3")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if len(self.initial) != self.factors:
            raise ValueError(f"need {self.factors} initial laws, got {len(self.initial)}")


@dataclass(eq=False)
class PathEnsemble:
    grid: TimeGrid
    scheme: str
    n_paths: int
    states: np.ndarray  # (n_records, n_paths, factors)
    root_seed: int
    factors: int

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def coords(self) -> tuple[str, ...]:
        return COORDS[self.factors]

    def coord(self, name: str) -> np.ndarray:
        """(n_records, n_paths) array of one coordinate."""
        try:
            j = self.coords.index(name)
        except ValueError:
            raise KeyError(f"{self.factors}-factor ensemble has no coordinate {name!r}") from None
        return self.states[:, :, j]

    def at(self, t: float) -> np.ndarray:
        return self.states[self.grid.index(t)]


def draw_initial(laws: Sequence[InitialLaw], factors: int, n_paths: int, root_seed: int) -> np.ndarray:
    """Initial states by quantile transform; coordinate c always uses counter COORD_COUNTER[c]."""
    paths = np.arange(n_paths, dtype=np.int64)
    cols = []
    for name, law in zip(COORDS[factors], laws):
        law = as_law(law)
        if isinstance(law, Constant):
            cols.append(np.full(n_paths, float(law.value)))
            continue
        u = uniforms(root_seed, paths, LANE_INIT, COORD_COUNTER[name])
        cols.append(np.asarray(law.quantile(u), dtype=np.float64))
    return np.column_stack(cols)


def run_kernel(init: np.ndarray, grid: TimeGrid, scheme: str, params: ModelParams, root_seed: int,
               path_offset: int = 0) -> np.ndarray:
    init = np.ascontiguousarray(init, dtype=np.float64)
    n_paths, factors = init.shape
    out = np.full((grid.n_records, n_paths, factors), np.nan)
    bad = np.full(n_paths, -1, dtype=np.int64)
    _kern.simulate(init, factors, scheme == "exact_v_euler_rest", np.array(params.as_tuple()), float(grid.dt),
                   grid.n_steps, grid.record_stride, np.uint64(root_seed), path_offset, out, bad)
    if (bad >= 0).any():
        p = int(np.flatnonzero(bad >= 0)[0])
        raise NonFiniteState(path=p + path_offset, step=int(bad[p]))
    return out


def simulate_ensemble(spec: EnsembleSpec, params: ModelParams, threads: int | None = None) -> PathEnsemble:
    """Draw initial data, step every path and return the recorded states.

    ``spec.init_states`` (n_paths, factors), when given, replaces the initial
    laws; use it to start from a joint sample such as a burned-in ensemble.
    """
    validate(params)
    _accel.set_threads(threads)
    if spec.init_states is not None:
        init = np.asarray(spec.init_states, dtype=np.float64)
        if init.shape != (spec.n_paths, spec.factors):
            raise ValueError(f"init_states must have shape {(spec.n_paths, spec.factors)}")
    else:
        init = draw_initial(spec.initial, spec.factors, spec.n_paths, spec.root_seed)
    if np.isnan(init).any():
        raise ValueError("initial states contain NaN")
    states = run_kernel(init, spec.grid, spec.scheme, params, spec.root_seed)
    return PathEnsemble(spec.grid, spec.scheme, spec.n_paths, states, spec.root_seed, spec.factors)


@dataclass(eq=False)
class CoupledEnsemble:
    kind: str
    first: PathEnsemble
    second: PathEnsemble

    @property
    def times(self) -> np.ndarray:
        return self.first.times

    @property
    def delta(self) -> np.ndarray:
        """First-coordinate difference, (n_records, n_paths)."""
        return self.first.states[:, :, 0] - self.second.states[:, :, 0]


def simulate_coupled(kind: str, initials_pair, grid: TimeGrid, params: ModelParams, n_paths: int,
                     root_seed: int = 0, scheme: str | None = None, threads: int | None = None,
                     init_states_pair=None) -> CoupledEnsemble:
    """Simulate two solutions driven by the same noise, differing only in the first coordinate.

    ``initials_pair`` holds two per-coordinate law lists. Every coordinate but
    the first must carry the same law in both, else CouplingPatternViolation.
    """
    if kind not in COUPLING_KINDS:
        raise ValueError(f"kind must be one of {COUPLING_KINDS}")
    factors = _COUPLING_FACTORS[kind]
    scheme = scheme or _COUPLING_SCHEME[kind]
    a, b = ([as_law(x) for x in laws] for laws in initials_pair)
    if len(a) != factors or len(b) != factors:
        raise ValueError(f"{kind} needs {factors} initial laws per side")
    if a[1:] != b[1:]:
        raise CouplingPatternViolation(f"{kind}: coordinates {COORDS[factors][1:]} must share their initial law")
    ens = []
    for i, laws in enumerate((a, b)):
        init = None
        if init_states_pair is not None:
            init = init_states_pair[i]
        ens.append(simulate_ensemble(EnsembleSpec(factors, laws, grid, n_paths, root_seed, scheme, init), params, threads))
    if init_states_pair is not None and not np.array_equal(ens[0].states[0, :, 1:], ens[1].states[0, :, 1:]):
        raise CouplingPatternViolation(f"{kind}: shared coordinates differ in the supplied initial states")
    return CoupledEnsemble(kind, ens[0], ens[1])
