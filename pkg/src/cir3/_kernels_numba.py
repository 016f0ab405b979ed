"""JIT kernels: counter-based RNG, samplers and the path stepper.

Every draw is a pure function of (root_seed, path, lane, counter), so a path's
trajectory never depends on which worker computes it.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

from ._rngconst import (
    AS241_A, AS241_B, AS241_C, AS241_D, AS241_E, AS241_F,
    GOLDEN, LANE_CIR, LANE_INCR, MIX1, MIX2, PATH_MULT, POISSON_NORMAL_CUTOFF, TWO_M53,
)

_GOLDEN = np.uint64(GOLDEN)
_MIX1 = np.uint64(MIX1)
_MIX2 = np.uint64(MIX2)
_PATH_MULT = np.uint64(PATH_MULT)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_A = np.array(AS241_A)
_B = np.array(AS241_B)
_C = np.array(AS241_C)
_D = np.array(AS241_D)
_E = np.array(AS241_E)
_F = np.array(AS241_F)


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True)
def stream_key(seed, path, lane):
    s = mix64(np.uint64(seed) + (np.uint64(lane) + _ONE) * _GOLDEN)
    return mix64(s ^ (np.uint64(path) * _PATH_MULT))


@njit(cache=True)
def uniform(key, counter):
    bits = mix64(np.uint64(key) + (np.uint64(counter) + _ONE) * _GOLDEN)
    return (float(bits >> _S11) + 0.5) * TWO_M53


@njit(cache=True)
def _horner(coef, x):
    acc = coef[7]
    for i in range(6, -1, -1):
        acc = acc * x + coef[i]
    return acc


@njit(cache=True)
def ndtri(p):
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _horner(_A, r) / _horner(_B, r)
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        x = _horner(_C, r) / _horner(_D, r)
    else:
        r -= 5.0
        x = _horner(_E, r) / _horner(_F, r)
    return -x if q < 0.0 else x


@njit(cache=True)
def normal(key, counter):
    return ndtri(uniform(key, counter))


@njit(cache=True)
def _gamma_ge1(shape, key, counter):
    # Marsaglia-Tsang; each attempt consumes two draws
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = normal(key, counter)
        u = uniform(key, counter + 1)
        counter += 2
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        if u < 1.0 - 0.0331 * x * x * x * x:
            return d * v, counter
        if math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return d * v, counter


@njit(cache=True)
def gamma_draw(shape, key, counter):
    """Standard Gamma(shape) draw; returns (value, next_counter)."""
    if shape < 1.0:
        g, counter = _gamma_ge1(shape + 1.0, key, counter)
        u = uniform(key, counter)
        return g * u ** (1.0 / shape), counter + 1
    return _gamma_ge1(shape, key, counter)


@njit(cache=True)
def poisson_draw(mean, key, counter):
    """Poisson(mean) as a float; inversion below 10, PTRS above, normal beyond 1e12."""
    if mean < 10.0:
        u = uniform(key, counter)
        p = math.exp(-mean)
        cdf = p
        k = 0.0
        while u > cdf and k < 1000.0:
            k += 1.0
            p *= mean / k
            cdf += p
        return k, counter + 1
    if mean > POISSON_NORMAL_CUTOFF:
        z = normal(key, counter)
        # np.floor stays in float64; math.floor would overflow int64 for huge means
        return max(0.0, np.floor(mean + math.sqrt(mean) * z + 0.5)), counter + 1
    slam = math.sqrt(mean)
    loglam = math.log(mean)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        uu = uniform(key, counter) - 0.5
        vv = uniform(key, counter + 1)
        counter += 2
        us = 0.5 - abs(uu)
        k = math.floor((2.0 * a / us + b) * uu + mean + 0.43)
        if us >= 0.07 and vv <= vr:
            return k, counter
        if k < 0.0 or (us < 0.013 and vv > us):
            continue
        if (math.log(vv) + math.log(invalpha) - math.log(a / (us * us) + b)
                <= -mean + k * loglam - math.lgamma(k + 1.0)):
            return k, counter


@njit(cache=True)
def cir_exact(v, dt, k_v, eta, gamma, key, counter):
    """Exact CIR transition via the Poisson mixture of Gamma laws."""
    e = math.exp(-k_v * dt)
    c = gamma * gamma * (1.0 - e) / (4.0 * k_v)
    dof = 4.0 * k_v * eta / (gamma * gamma)
    lam = v * e / c
    n, counter = poisson_draw(0.5 * lam, key, counter)
    g, counter = gamma_draw(0.5 * dof + n, key, counter)
    return 2.0 * c * g, counter


@njit(parallel=True, cache=True)
def simulate(init, n_factors, exact_v, prm, dt, n_steps, stride, seed, path_offset, out, bad_step):
    """Advance ``init`` (n_paths, n_factors) and write records into ``out``.

    ``out`` has shape (n_steps // stride + 1, n_paths, n_factors); columns are
    ``v`` / ``(theta, v)`` / ``(R, theta, v)``. ``bad_step[p]`` is set to the
    step at which path p became non-finite (else left at -1).
    """
    k, k_th, k_v, alpha, beta, gamma, zeta, eta, rho_th, rho_v = (
        prm[0], prm[1], prm[2], prm[3], prm[4], prm[5], prm[6], prm[7], prm[8], prm[9])
    sq_rho_bar = math.sqrt(1.0 - rho_th * rho_th - rho_v * rho_v)
    sdt = math.sqrt(dt)
    n_paths = init.shape[0]
    iv = n_factors - 1
    for p in prange(n_paths):
        path = path_offset + p
        key_i = stream_key(seed, path, LANE_INCR)
        key_c = stream_key(seed, path, LANE_CIR)
        cnt_c = 0
        v = init[p, iv]
        th = init[p, iv - 1] if n_factors >= 2 else 0.0
        r = init[p, 0] if n_factors == 3 else 0.0
        for j in range(n_factors):
            out[0, p, j] = init[p, j]
        rec = 1
        for s in range(n_steps):
            base = 3 * s
            vp = max(v, 0.0)
            sv = math.sqrt(vp)
            if exact_v:
                vn, cnt_c = cir_exact(vp, dt, k_v, eta, gamma, key_c, cnt_c)
                if gamma > 1e-8:
                    ito = (vn - vp - k_v * (eta - 0.5 * (vp + vn)) * dt) / gamma
                else:
                    ito = sv * sdt * normal(key_i, base + 2)
            else:
                dw3 = sdt * normal(key_i, base + 2)
                vn = vp + k_v * (eta - vp) * dt + gamma * sv * dw3
                ito = sv * dw3
            if n_factors >= 2:
                thp = max(th, 0.0)
                g2 = normal(key_i, base + 1)
                thn = thp + k_th * (zeta - thp) * dt + alpha * beta * math.sqrt(vp * thp) * sdt * g2
                if n_factors == 3:
                    rp = max(r, 0.0)
                    g1 = normal(key_i, base)
                    noise = sv * sdt * (sq_rho_bar * g1 + rho_th * g2) + rho_v * ito
                    r = max(rp + k * (thp - rp) * dt + alpha * math.sqrt(rp) * noise, 0.0)
                th = max(thn, 0.0)
            v = max(vn, 0.0)
            if not (math.isfinite(v) and math.isfinite(th) and math.isfinite(r)):
                bad_step[p] = s
                break
            if (s + 1) % stride == 0:
                if n_factors == 3:
                    out[rec, p, 0] = r
                if n_factors >= 2:
                    out[rec, p, iv - 1] = th
                out[rec, p, iv] = v
                rec += 1
