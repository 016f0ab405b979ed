"""Empirical Wasserstein distances between equal-size uniform sample clouds."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from ._rngconst import LANE_AUX
from .noise import normals

EXACT_CAP = 512


class SizeMismatch(ValueError):
    pass


class InstanceTooLarge(ValueError):
    pass


class TimeNotRecorded(KeyError):
    pass


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    samples: np.ndarray  # (n, dim)

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or not 1 <= x.shape[1] <= 3:
            raise ValueError("samples must be (n, dim) with n >= 1 and dim in 1..3")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", x)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def _cloud(x) -> np.ndarray:
    return x.samples if isinstance(x, EmpiricalMeasure) else EmpiricalMeasure(x).samples


def _same_n(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape[0] != y.shape[0]:
        raise SizeMismatch(f"clouds have {x.shape[0]} and {y.shape[0]} points")
    if x.shape[1] != y.shape[1]:
        raise SizeMismatch(f"clouds have dimensions {x.shape[1]} and {y.shape[1]}")


@dataclass
class Estimate:
    value: float
    stderr: float


def wasserstein_1d(p: float, X, Y, with_se: bool = False):
    """W_p by sorted (comonotone) pairing of the order statistics.

    With ``with_se`` also returns a delta-method SE treating the paired
    costs |X_(i) - Y_(i)|^p as i.i.d.; a rough guide, not an exact error.
    """
    x, y = _cloud(X), _cloud(Y)
    _same_n(x, y)
    if x.shape[1] != 1:
        raise ValueError("wasserstein_1d needs 1-D clouds")
    cost = np.abs(np.sort(x[:, 0]) - np.sort(y[:, 0])) ** p
    m = float(cost.mean())
    w = m ** (1.0 / p)
    if not with_se:
        return w
    n = cost.size
    se_m = float(cost.std(ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    se = se_m / (p * m ** (1.0 - 1.0 / p)) if m > 0.0 else se_m ** (1.0 / p)
    return Estimate(w, se)


def _cost(x: np.ndarray, y: np.ndarray, p: float) -> np.ndarray:
    return cdist(x, y) ** p


def wasserstein_exact_small(p: float, X, Y, cap: int = EXACT_CAP) -> float:
    """Exact W_p via an optimal assignment on the |x_i - y_j|^p cost matrix."""
    x, y = _cloud(X), _cloud(Y)
    _same_n(x, y)
    if x.shape[0] > cap:
        raise InstanceTooLarge(f"n = {x.shape[0]} exceeds the exact-solver cap {cap}")
    c = _cost(x, y, p)
    rows, cols = linear_sum_assignment(c)
    # fsum is correctly rounded, so the result does not depend on pairing order (exact symmetry)
    return (math.fsum(c[rows, cols].tolist()) / x.shape[0]) ** (1.0 / p)


def wasserstein_bruteforce(p: float, X, Y, max_n: int = 9) -> float:
    """Minimum over all n! permutations; an oracle for tiny instances."""
    x, y = _cloud(X), _cloud(Y)
    _same_n(x, y)
    n = x.shape[0]
    if n > max_n:
        raise InstanceTooLarge(f"brute force limited to n <= {max_n}")
    c = _cost(x, y, p)
    idx = np.arange(n)
    best = min(c[idx, list(perm)].sum() for perm in itertools.permutations(range(n)))
    return float(best / n) ** (1.0 / p)


@dataclass
class SlicedEstimate:
    value: float
    spread: float
    n_projections: int


def random_directions(dim: int, n: int, root_seed: int = 0) -> np.ndarray:
    paths = np.arange(n, dtype=np.int64)
    g = np.column_stack([normals(root_seed, paths, LANE_AUX, 1000 + j) for j in range(dim)])
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def wasserstein_sliced(p: float, X, Y, n_projections: int = 256, root_seed: int = 0) -> SlicedEstimate:
    """Mean of 1-D W_p over random unit directions.

    Biased low relative to the joint W_p; use for trends, not bound verdicts.
    ``spread`` is the across-projection standard deviation.
    """
    x, y = _cloud(X), _cloud(Y)
    _same_n(x, y)
    u = random_directions(x.shape[1], n_projections, root_seed)
    px = np.sort(x @ u.T, axis=0)
    py = np.sort(y @ u.T, axis=0)
    vals = np.mean(np.abs(px - py) ** p, axis=0) ** (1.0 / p)
    spread = float(vals.std(ddof=1)) if n_projections > 1 else 0.0
    return SlicedEstimate(float(vals.mean()), spread, n_projections)


def projection_factor(dim: int) -> float:
    """E|<e_1, u>| for u uniform on the unit sphere in R^dim."""
    return math.gamma(dim / 2) / (math.sqrt(math.pi) * math.gamma((dim + 1) / 2))


def coupling_upper_bound(coupled, p: float, t: float) -> Estimate:
    """(E|Delta_t|^p)^(1/p) for a synchronously coupled pair, with a delta-method SE."""
    try:
        i = coupled.first.grid.index(t)
    except KeyError as exc:
        raise TimeNotRecorded(str(exc)) from None
    d = np.abs(coupled.delta[i]) ** p
    m = float(d.mean())
    n = d.size
    se_m = float(d.std(ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    if m == 0.0:
        return Estimate(0.0, 0.0)
    return Estimate(m ** (1.0 / p), se_m / (p * m ** (1.0 - 1.0 / p)))
