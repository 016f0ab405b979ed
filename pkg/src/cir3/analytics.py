"""Closed-form laws, moment curves, bound constants and rate fitting."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln, poch

from .params import GammaStationary, ModelParams, stationary_gamma

KINDS = {
    # kind: (powered coordinate, multiplier coordinate or None)
    "F_v": ("v", None),
    "F_theta": ("theta", None),
    "F_R": ("R", None),
    "G_theta": ("theta", "v"),
    "G_R": ("R", "v"),
    "J_R": ("R", "theta"),
}


class KindDimensionMismatch(ValueError):
    pass


class NonPositiveValue(ValueError):
    pass


class OrderTooLow(ValueError):
    pass


# ---- stationary law -------------------------------------------------------------


def gamma_moment(p: float, g: GammaStationary) -> float:
    """E[V^p] for V ~ Gamma(shape, scale)."""
    if g.shape + p <= 0.0:
        raise ValueError("need shape + p > 0")
    # fractional part via poch, integer part by the recursion M_{q+1} = (shape + q) scale M_q,
    # so shifting p by whole numbers reproduces the recursion to a few ulp
    a, s = g.shape, g.scale
    n = math.floor(p)
    f = p - n
    m = float(poch(a, f)) * s**f if f else 1.0
    if n >= 0:
        for j in range(n):
            m *= (a + f + j) * s
    else:
        for j in range(-1, n - 1, -1):
            m /= (a + f + j) * s
    return m


def mean_v(t: float, mean_v0: float, params: ModelParams) -> float:
    if t < 0.0:
        raise ValueError("t must be >= 0")
    return params.eta + (mean_v0 - params.eta) * math.exp(-params.k_v * t)


def mean_theta(t: float, mean_theta0: float, params: ModelParams) -> float:
    return params.zeta + (mean_theta0 - params.zeta) * math.exp(-params.k_theta * t)


# ---- moment curves --------------------------------------------------------------


@dataclass
class MomentCurve:
    p: float
    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    kind: str


def jackknife_mean_se(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Jackknife standard error of a sample mean.

    For the mean the leave-one-out pseudo-values reduce to the sample itself,
    so the jackknife SE equals std(ddof=1)/sqrt(n) and needs no resampling.
    """
    n = x.shape[axis]
    if n < 2:
        return np.zeros(np.delete(x.shape, axis % x.ndim))
    return np.std(x, axis=axis, ddof=1) / math.sqrt(n)


def moment_curve(ensemble, p: float, kind: str) -> MomentCurve:
    """Per-time mean and SE of the functional named by ``kind`` (see KINDS)."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {sorted(KINDS)}")
    if p < 1.0:
        raise ValueError("p must be >= 1")
    base, mult = KINDS[kind]
    try:
        x = np.abs(ensemble.coord(base)) ** p
        if mult is not None:
            x = x * ensemble.coord(mult)
    except KeyError:
        raise KindDimensionMismatch(f"{kind} needs coordinates {base}/{mult}; ensemble has {ensemble.coords}") from None
    return MomentCurve(p, ensemble.times.copy(), x.mean(axis=1), jackknife_mean_se(x, axis=1), kind)


# ---- bound constants ------------------------------------------------------------


def _m(p: float, params: ModelParams) -> float:
    return gamma_moment(p, stationary_gamma(params))


def bound_C_p_v(p: float, params: ModelParams, x: float) -> float:
    """Constant C_p^v(x) in E|Delta_t|^p <= C_p^v(x) exp(-rate t); x = E[X^p]."""
    if p < 1.0:
        raise ValueError("p must be >= 1")
    if x < 0.0:
        raise ValueError("moment argument must be >= 0")
    g2, kv = params.gamma**2, params.k_v
    if p == 1.0:
        return x + _m(1.0, params)
    if float(p).is_integer():
        c = x + _m(1.0, params)
        for q in range(2, int(p) + 1):
            c = 2.0 ** (q - 1) * (x + _m(q, params)) + q * (q - 1) * g2 * c / (2.0 * (q - 1) * kv)
        return c
    if p < 2.0:
        return 2.0 ** (p - 1) * (x + _m(p, params)) + p * (p - 1) * g2 / (2.0 * kv) * (x + params.eta) ** (p - 1)
    fl = math.floor(p)
    c_fl = bound_C_p_v(float(fl), params, x)
    return (2.0 ** (p - 1) * (x + _m(p, params))
            + p * (p - 1) * g2 * c_fl ** ((p - 1) / fl) * fl / (2.0 * (p * (fl - 1) + 1) * kv))


def bound_Ctilde_p_v(p: float, params: ModelParams, x: float) -> float:
    """Uniform-in-time bound on E[v_t^p]."""
    return 2.0 ** (p - 1) * (bound_C_p_v(p, params, x) + _m(p, params))


def bound_C_p_theta(p: float, params: ModelParams, x2: float) -> tuple[float, Callable[[float], float]]:
    """(C_p^theta(x2), x1 -> Ctilde_p^theta(x1, x2)) with x1 = E[theta_0^p], x2 = E[v_0^p]."""
    if p < 2.0:
        raise OrderTooLow("theta bounds need p >= 2")
    a2b2, kt, z = (params.alpha * params.beta) ** 2, params.k_theta, params.zeta
    base = ((a2b2 * (p - 1) + 2.0 * kt * z * (p - 1)) / (p * kt)) ** (p - 1)
    c = base * (z * kt + a2b2 * (p - 1) / 2.0 * bound_Ctilde_p_v(p, params, x2)) * 2.0 / (kt * p)
    return c, lambda x1: max(float(x1), c)


def bound_Ctilde_p_theta(p: float, params: ModelParams, x1: float, x2: float) -> float:
    return bound_C_p_theta(p, params, x2)[1](x1)


def bound_Ctilde_p_R(p: float, params: ModelParams, x0: float, x1: float, x2: float) -> float:
    """Uniform bound on E[R_t^p] (reconstructed; see module docs in README).

    From dF/dt = -kpF + kp E[R^{p-1} theta] + a^2 p(p-1)/2 E[R^{p-1} v] and
    Young's inequality with weight k/(2k + a^2(p-1)) on both cross terms.
    """
    if p < 2.0:
        raise OrderTooLow("R bounds need p >= 2")
    k, a2 = params.k, params.alpha**2
    young = ((a2 * (p - 1) ** 2 + 2.0 * k * (p - 1)) / (k * p)) ** (p - 1) / p
    ct = bound_Ctilde_p_theta(p, params, x1, x2)
    cv = bound_Ctilde_p_v(p, params, x2)
    c = 2.0 * young * (k * ct + a2 * (p - 1) / 2.0 * cv) / k
    return max(float(x0), c)


def wasserstein_rate(p: float, params: ModelParams) -> float:
    if p < 1.0:
        raise ValueError("p must be >= 1")
    if p == 1.0:
        return params.k_v
    return (p - 1) / (p * (math.ceil(p) - 1)) * params.k_v


@dataclass
class BoundLedger:
    p: float
    M_p: float
    C_p_v: float
    Ctilde_p_v: float
    C_p_theta: float | None
    Ctilde_p_theta: float | None
    rate_exponent: float

    def to_dict(self) -> dict:
        return asdict(self)


def bound_ledger(p: float, params: ModelParams, e_v0_p: float, e_theta0_p: float | None = None) -> BoundLedger:
    c_th = ct_th = None
    if p >= 2.0:
        c_th, f = bound_C_p_theta(p, params, e_v0_p)
        ct_th = f(e_theta0_p) if e_theta0_p is not None else None
    return BoundLedger(p, _m(p, params), bound_C_p_v(p, params, e_v0_p), bound_Ctilde_p_v(p, params, e_v0_p),
                       c_th, ct_th, wasserstein_rate(p, params))


# ---- verdict helpers ------------------------------------------------------------


@dataclass
class BoundVerdict:
    holds: bool
    bound: float
    at_time: float | None = None


def check_linear_integral_bound(curve: MomentCurve, A: float, B: float, n_se: float = 3.0) -> BoundVerdict:
    """Check F(t) <= max{F(0), A/B} at every point, allowing ``n_se`` standard errors."""
    if A <= 0.0 or B <= 0.0:
        raise ValueError("A and B must be > 0")
    bound = max(float(curve.values[0]), A / B)
    excess = curve.values - n_se * curve.stderr > bound * (1.0 + 1e-12)
    if excess.any():
        return BoundVerdict(False, bound, float(curve.times[np.argmax(excess)]))
    return BoundVerdict(True, bound)


@dataclass
class RateFit:
    rate: float
    intercept: float
    r2: float


def fit_exponential_rate(times, values, window: tuple[float, float] | None = None) -> RateFit:
    """Least-squares line through (t, log value); ``rate`` is the slope."""
    t = np.asarray(times, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if window is not None:
        sel = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
        t, y = t[sel], y[sel]
    if t.size < 2:
        raise ValueError("need at least two points in the fit window")
    if np.any(y <= 0.0):
        raise NonPositiveValue("all values must be > 0 to fit a log-linear rate")
    ly = np.log(y)
    slope, intercept = np.polyfit(t, ly, 1)
    resid = ly - (slope * t + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0.0 else 1.0
    return RateFit(float(slope), float(intercept), r2)
