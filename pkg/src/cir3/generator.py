"""Pointwise generators and the Monte Carlo check of  E_pi[G phi] = 0.

Test functions are products of 1-D factors ``bump(x) * x**power`` where the
bump is a C^2 plateau built from the quintic smootherstep. They vanish with
their first two derivatives outside the support box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .analytics import jackknife_mean_se
from .params import ModelParams
from .sde import diffusion, drift


class ArityMismatch(ValueError):
    pass


def _smootherstep(s: np.ndarray):
    s = np.clip(s, 0.0, 1.0)
    f = s**3 * (10.0 - 15.0 * s + 6.0 * s * s)
    d1 = 30.0 * s * s * (1.0 - s) ** 2
    d2 = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s)
    return f, d1, d2


@dataclass(frozen=True)
class Factor1D:
    """Plateau bump on [lo, hi] with ramps of width ``ramp``, times x**power."""

    lo: float
    hi: float
    ramp: float
    power: int = 0

    def __post_init__(self):
        if not (self.hi > self.lo and 0.0 < self.ramp <= 0.5 * (self.hi - self.lo)):
            raise ValueError("need hi > lo and 0 < ramp <= (hi - lo)/2")

    def eval(self, x: np.ndarray):
        """(f, f', f'') at x."""
        x = np.asarray(x, dtype=np.float64)
        w = self.ramp
        up, up1, up2 = _smootherstep((x - self.lo) / w)
        dn, dn1, dn2 = _smootherstep((self.hi - x) / w)
        b = up * dn
        b1 = (up1 * dn - up * dn1) / w
        b2 = (up2 * dn - 2.0 * up1 * dn1 + up * dn2) / (w * w)
        e = self.power
        if e == 0:
            return b, b1, b2
        m = x**e
        m1 = e * x ** (e - 1)
        m2 = e * (e - 1) * x ** (e - 2) if e >= 2 else np.zeros_like(x)
        return b * m, b1 * m + b * m1, b2 * m + 2.0 * b1 * m1 + b * m2


class TestFunction:
    """Interface: value (n,), grad (n, d), hess (n, d, d) on (n, d) points."""

    arity: int
    name: str = "phi"

    def derivatives(self, x: np.ndarray):
        raise NotImplementedError

    def value(self, x):
        return self.derivatives(x)[0]

    def grad(self, x):
        return self.derivatives(x)[1]

    def hess(self, x):
        return self.derivatives(x)[2]


@dataclass
class BumpProduct(TestFunction):
    factors: tuple[Factor1D, ...]
    scale: float = 1.0
    name: str = "bump"

    @property
    def arity(self) -> int:
        return len(self.factors)

    @property
    def support(self) -> list[tuple[float, float]]:
        return [(f.lo, f.hi) for f in self.factors]

    def derivatives(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.arity:
            raise ArityMismatch(f"{self.name} has arity {self.arity}, points have dimension {x.shape[1]}")
        d = self.arity
        parts = [f.eval(x[:, j]) for j, f in enumerate(self.factors)]
        f0 = np.stack([p[0] for p in parts], axis=1)
        f1 = np.stack([p[1] for p in parts], axis=1)
        f2 = np.stack([p[2] for p in parts], axis=1)
        val = self.scale * np.prod(f0, axis=1)
        grad = np.empty_like(x)
        hess = np.empty(x.shape + (d,))
        for i in range(d):
            others = np.prod(np.delete(f0, i, axis=1), axis=1)
            grad[:, i] = self.scale * f1[:, i] * others
            hess[:, i, i] = self.scale * f2[:, i] * others
            for j in range(i + 1, d):
                rest = np.prod(np.delete(f0, [i, j], axis=1), axis=1)
                hess[:, i, j] = hess[:, j, i] = self.scale * f1[:, i] * f1[:, j] * rest
        return val, grad, hess


@dataclass
class ConstantFunction(TestFunction):
    c: float
    arity: int
    name: str = "const"

    def derivatives(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        n, d = x.shape
        if d != self.arity:
            raise ArityMismatch(f"{self.name} has arity {self.arity}, points have dimension {d}")
        return np.full(n, float(self.c)), np.zeros((n, d)), np.zeros((n, d, d))


@dataclass
class Combination(TestFunction):
    terms: Sequence[tuple[float, TestFunction]]
    name: str = "combo"

    @property
    def arity(self) -> int:
        return self.terms[0][1].arity

    def derivatives(self, x):
        out = None
        for a, phi in self.terms:
            parts = phi.derivatives(x)
            out = [a * q for q in parts] if out is None else [o + a * q for o, q in zip(out, parts)]
        return tuple(out)


# ---- generators -----------------------------------------------------------------


def _check(phi: TestFunction, state, arity: int) -> np.ndarray:
    x = np.atleast_2d(np.asarray(state, dtype=np.float64))
    if phi.arity != arity or x.shape[1] != arity:
        raise ArityMismatch(f"expected arity {arity}, got function {phi.arity} and points {x.shape[1]}")
    return x


def apply_generator_v(phi: TestFunction, state, params: ModelParams) -> np.ndarray:
    """k_v(eta - v) phi' + gamma^2 |v| phi'' / 2."""
    x = _check(phi, state, 1)
    _, g, h = phi.derivatives(x)
    v = x[:, 0]
    return params.k_v * (params.eta - v) * g[:, 0] + 0.5 * params.gamma**2 * np.abs(v) * h[:, 0, 0]


def apply_generator_theta(phi: TestFunction, state, params: ModelParams) -> np.ndarray:
    """b . grad phi + Tr(sigma^T H sigma)/2 on (theta, v) points."""
    x = _check(phi, state, 2)
    _, g, h = phi.derivatives(x)
    th, v = x[:, 0], np.abs(x[:, 1])
    b = np.column_stack([params.k_theta * (params.zeta - th), params.k_v * (params.eta - x[:, 1])])
    a11 = (params.alpha * params.beta) ** 2 * v * np.abs(th)
    a22 = params.gamma**2 * v
    return np.sum(b * g, axis=1) + 0.5 * (a11 * h[:, 0, 0] + a22 * h[:, 1, 1])


def apply_generator_R(phi: TestFunction, state, params: ModelParams) -> np.ndarray:
    """b . grad phi + Tr(sigma^T H sigma)/2 on (R, theta, v) points."""
    x = _check(phi, state, 3)
    _, g, h = phi.derivatives(x)
    s = diffusion(x, params)
    a = np.einsum("nik,njk->nij", s, s)
    return np.sum(drift(x, params) * g, axis=1) + 0.5 * np.einsum("nij,nij->n", a, h)


GENERATORS = {1: apply_generator_v, 2: apply_generator_theta, 3: apply_generator_R}


# ---- stationarity residual ------------------------------------------------------


@dataclass
class ResidualRow:
    function_id: str
    mean: float
    stderr: float
    z: float


@dataclass
class ResidualTable:
    rows: list[ResidualRow] = field(default_factory=list)
    threshold: float = 3.0

    @property
    def consistent(self) -> bool:
        """Necessary condition only: passing cannot prove invariance."""
        return all(abs(r.z) <= self.threshold for r in self.rows)

    @property
    def max_abs_z(self) -> float:
        return max((abs(r.z) for r in self.rows), default=0.0)


def stationarity_residual(samples, family: Sequence[TestFunction], params: ModelParams,
                          threshold: float = 3.0) -> ResidualTable:
    """Mean, SE and z-score of G phi over ``samples`` for every phi in ``family``."""
    x = samples.samples if hasattr(samples, "samples") else np.asarray(samples, dtype=np.float64)
    x = x[:, None] if x.ndim == 1 else x
    table = ResidualTable(threshold=threshold)
    for i, phi in enumerate(family):
        if phi.arity != x.shape[1]:
            raise ArityMismatch(f"function {i} has arity {phi.arity}, samples have dimension {x.shape[1]}")
        g = GENERATORS[phi.arity](phi, x, params)
        m = float(g.mean())
        se = float(jackknife_mean_se(g))
        z = m / se if se > 0.0 else (0.0 if m == 0.0 else math.copysign(math.inf, m))
        table.rows.append(ResidualRow(getattr(phi, "name", f"phi{i}"), m, se, z))
    return table


DEFAULT_POWERS = {
    1: [(0,), (1,), (2,), (3,), (4,)],
    2: [(0, 0), (1, 0), (0, 1), (1, 1), (0, 2)],
    3: [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0), (0, 0, 1)],
}


def default_family(samples, q_lo: float = 0.001, q_hi: float = 0.999, ramp_frac: float = 0.25) -> list[BumpProduct]:
    """Five bump-times-monomial functions on the central quantile box of ``samples``."""
    x = samples.samples if hasattr(samples, "samples") else np.asarray(samples, dtype=np.float64)
    x = x[:, None] if x.ndim == 1 else x
    lo = np.quantile(x, q_lo, axis=0)
    hi = np.quantile(x, q_hi, axis=0)
    fam = []
    for powers in DEFAULT_POWERS[x.shape[1]]:
        factors = tuple(
            Factor1D(float(l), float(h), ramp_frac * float(h - l), e) for l, h, e in zip(lo, hi, powers)
        )
        # normalise so each function is O(1) on its box
        scale = 1.0 / float(np.prod([max(abs(h), 1e-12) ** e for h, e in zip(hi, powers)]))
        label = "*".join(f"x{j + 1}^{e}" for j, e in enumerate(powers) if e) or "1"
        fam.append(BumpProduct(factors, scale, f"bump[{label}]"))
    return fam
