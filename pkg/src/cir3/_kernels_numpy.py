"""Pure-numpy fallback for the JIT kernels, vectorised across paths.

Consumes the same (key, counter) draws as the JIT kernels, so both backends
produce the same trajectories up to libm rounding differences.
"""
from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from ._rngconst import (
    AS241_A, AS241_B, AS241_C, AS241_D, AS241_E, AS241_F,
    GOLDEN, LANE_CIR, LANE_INCR, MIX1, MIX2, PATH_MULT, POISSON_NORMAL_CUTOFF, TWO_M53,
)

_U = np.uint64


def _u64(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x).astype(np.uint64))


def mix64(z) -> np.ndarray:
    z = _u64(z)
    z = (z ^ (z >> _U(30))) * _U(MIX1)
    z = (z ^ (z >> _U(27))) * _U(MIX2)
    return z ^ (z >> _U(31))


def stream_key(seed, path, lane) -> np.ndarray:
    s = mix64(_u64(seed) + (_u64(lane) + _U(1)) * _U(GOLDEN))
    return mix64(s ^ (_u64(path) * _U(PATH_MULT)))


def uniform(key, counter) -> np.ndarray:
    bits = mix64(_u64(key) + (_u64(counter) + _U(1)) * _U(GOLDEN))
    return ((bits >> _U(11)).astype(np.float64) + 0.5) * TWO_M53


def _horner(coef, x):
    acc = np.full_like(x, coef[7])
    for c in coef[6::-1]:
        acc = acc * x + c
    return acc


def ndtri(p) -> np.ndarray:
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    q = p - 0.5
    out = np.empty_like(p)
    central = np.abs(q) <= 0.425
    r = 0.180625 - q[central] ** 2
    out[central] = q[central] * _horner(AS241_A, r) / _horner(AS241_B, r)
    tail = ~central
    if tail.any():
        pt = p[tail]
        r = np.sqrt(-np.log(np.where(q[tail] < 0.0, pt, 1.0 - pt)))
        near = r <= 5.0
        x = np.empty_like(r)
        x[near] = _horner(AS241_C, r[near] - 1.6) / _horner(AS241_D, r[near] - 1.6)
        x[~near] = _horner(AS241_E, r[~near] - 5.0) / _horner(AS241_F, r[~near] - 5.0)
        out[tail] = np.where(q[tail] < 0.0, -x, x)
    return out


def normal(key, counter) -> np.ndarray:
    return ndtri(uniform(key, counter))


def _gamma_ge1(shape, keys, counters):
    d = shape - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty_like(shape)
    todo = np.arange(shape.size)
    while todo.size:
        x = normal(keys[todo], counters[todo])
        u = uniform(keys[todo], counters[todo] + 1)
        counters[todo] += 2
        dd = d[todo]
        v = 1.0 + c[todo] * x
        pos = v > 0.0
        v3 = np.where(pos, v, 1.0) ** 3
        with np.errstate(divide="ignore", invalid="ignore"):
            ok = pos & (
                (u < 1.0 - 0.0331 * x**4)
                | (np.log(u) < 0.5 * x * x + dd * (1.0 - v3 + np.log(v3)))
            )
        out[todo[ok]] = dd[ok] * v3[ok]
        todo = todo[~ok]
    return out


def gamma_draw(shape, keys, counters):
    """Vectorised standard Gamma draws; ``counters`` is advanced in place."""
    shape = np.atleast_1d(np.asarray(shape, dtype=np.float64))
    keys = _u64(keys)
    small = shape < 1.0
    out = _gamma_ge1(np.where(small, shape + 1.0, shape), keys, counters)
    if small.any():
        u = uniform(keys[small], counters[small])
        counters[small] += 1
        out[small] *= u ** (1.0 / shape[small])
    return out


def poisson_draw(mean, keys, counters):
    """Vectorised Poisson draws (as floats); ``counters`` is advanced in place."""
    mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
    keys = _u64(keys)
    out = np.zeros_like(mean)

    inv = np.flatnonzero(mean < 10.0)
    if inv.size:
        m = mean[inv]
        u = uniform(keys[inv], counters[inv])
        counters[inv] += 1
        p = np.exp(-m)
        cdf = p.copy()
        k = np.zeros_like(m)
        live = u > cdf
        while live.any():
            k[live] += 1.0
            p[live] *= m[live] / k[live]
            cdf[live] += p[live]
            live &= (u > cdf) & (k < 1000.0)
        out[inv] = k

    big = np.flatnonzero(mean > POISSON_NORMAL_CUTOFF)
    if big.size:
        m = mean[big]
        z = normal(keys[big], counters[big])
        counters[big] += 1
        out[big] = np.maximum(0.0, np.floor(m + np.sqrt(m) * z + 0.5))

    todo = np.flatnonzero((mean >= 10.0) & (mean <= POISSON_NORMAL_CUTOFF))
    if todo.size:
        lam = mean[todo]
        b = 0.931 + 2.53 * np.sqrt(lam)
        a = -0.059 + 0.02483 * b
        invalpha = 1.1239 + 1.1328 / (b - 3.4)
        vr = 0.9277 - 3.6224 / (b - 2.0)
        loglam = np.log(lam)
        live = np.arange(todo.size)
        while live.size:
            idx = todo[live]
            uu = uniform(keys[idx], counters[idx]) - 0.5
            vv = uniform(keys[idx], counters[idx] + 1)
            counters[idx] += 2
            us = 0.5 - np.abs(uu)
            aa, bb, ll = a[live], b[live], lam[live]
            k = np.floor((2.0 * aa / us + bb) * uu + ll + 0.43)
            quick = (us >= 0.07) & (vv <= vr[live])
            reject = ~quick & ((k < 0.0) | ((us < 0.013) & (vv > us)))
            check = ~quick & ~reject
            ok = quick.copy()
            if check.any():
                kc = k[check]
                lhs = np.log(vv[check]) + np.log(invalpha[live][check]) - np.log(aa[check] / us[check] ** 2 + bb[check])
                rhs = -ll[check] + kc * loglam[live][check] - gammaln(kc + 1.0)
                ok[check] = lhs <= rhs
            out[idx[ok]] = k[ok]
            live = live[~ok]
    return out


def cir_exact(v, dt, k_v, eta, gamma, keys, counters):
    e = np.exp(-k_v * dt)
    c = gamma * gamma * (1.0 - e) / (4.0 * k_v)
    dof = 4.0 * k_v * eta / (gamma * gamma)
    lam = np.asarray(v, dtype=np.float64) * e / c
    n = poisson_draw(0.5 * lam, keys, counters)
    return 2.0 * c * gamma_draw(0.5 * dof + n, keys, counters)


def simulate(init, n_factors, exact_v, prm, dt, n_steps, stride, seed, path_offset, out, bad_step):
    """Same contract as the JIT ``simulate``, stepping all paths together."""
    k, k_th, k_v, alpha, beta, gamma, zeta, eta, rho_th, rho_v = (float(x) for x in prm)
    sq_rho_bar = np.sqrt(1.0 - rho_th * rho_th - rho_v * rho_v)
    sdt = np.sqrt(dt)
    n_paths = init.shape[0]
    iv = n_factors - 1
    paths = np.arange(n_paths, dtype=np.int64) + path_offset
    key_i = stream_key(seed, paths, LANE_INCR)
    key_c = stream_key(seed, paths, LANE_CIR)
    cnt_c = np.zeros(n_paths, dtype=np.int64)
    v = init[:, iv].astype(np.float64)
    th = init[:, iv - 1].astype(np.float64) if n_factors >= 2 else np.zeros(n_paths)
    r = init[:, 0].astype(np.float64) if n_factors == 3 else np.zeros(n_paths)
    out[0] = init
    alive = np.ones(n_paths, dtype=bool)
    rec = 1
    for s in range(n_steps):
        base = np.full(n_paths, 3 * s, dtype=np.int64)
        vp = np.maximum(v, 0.0)
        sv = np.sqrt(vp)
        if exact_v:
            vn = cir_exact(vp, dt, k_v, eta, gamma, key_c, cnt_c)
            if gamma > 1e-8:
                ito = (vn - vp - k_v * (eta - 0.5 * (vp + vn)) * dt) / gamma
            else:
                ito = sv * sdt * normal(key_i, base + 2)
        else:
            dw3 = sdt * normal(key_i, base + 2)
            vn = vp + k_v * (eta - vp) * dt + gamma * sv * dw3
            ito = sv * dw3
        with np.errstate(invalid="ignore", over="ignore"):
            if n_factors >= 2:
                thp = np.maximum(th, 0.0)
                g2 = normal(key_i, base + 1)
                thn = thp + k_th * (zeta - thp) * dt + alpha * beta * np.sqrt(vp * thp) * sdt * g2
                if n_factors == 3:
                    rp = np.maximum(r, 0.0)
                    g1 = normal(key_i, base)
                    noise = sv * sdt * (sq_rho_bar * g1 + rho_th * g2) + rho_v * ito
                    r = np.maximum(rp + k * (thp - rp) * dt + alpha * np.sqrt(rp) * noise, 0.0)
                th = np.maximum(thn, 0.0)
            v = np.maximum(vn, 0.0)
        bad = alive & ~(np.isfinite(v) & np.isfinite(th) & np.isfinite(r))
        if bad.any():
            bad_step[bad] = s
            alive &= ~bad
        if (s + 1) % stride == 0:
            if n_factors == 3:
                out[rec, alive, 0] = r[alive]
            if n_factors >= 2:
                out[rec, alive, iv - 1] = th[alive]
            out[rec, alive, iv] = v[alive]
            rec += 1
        if not alive.any():
            break
