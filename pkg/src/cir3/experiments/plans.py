"""One function per named experiment; each fills a Report with claims and curves."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import analytics as an
from .. import storage
from ..generator import BumpProduct, Factor1D, default_family, stationarity_residual
from ..noise import GammaLaw, gamma_cloud
from ..params import ModelParams, stationary_gamma, validate
from ..sde import (
    EnsembleSpec, PathEnsemble, TimeGrid, simulate_coupled, simulate_ensemble,
)
from ..transport import wasserstein_1d, wasserstein_sliced
from .config import ExperimentConfig
from .report import ADVISORY, FAIL, PASS, Claim, Curve, Report

U64 = 2**64


@dataclass
class Context:
    cfg: ExperimentConfig
    report: Report
    threads: int | None = None
    save_ensembles: bool = False
    resolved: dict = field(default_factory=dict)

    @property
    def params(self) -> ModelParams:
        return self.cfg.model

    def opt(self, key: str, default):
        value = self.cfg.options.get(key, default)
        if isinstance(default, float) and isinstance(value, int):
            value = float(value)
        self.resolved[key] = value
        return value

    def n_paths(self, default: int) -> int:
        n = self.cfg.n_paths or default
        self.resolved["n_paths"] = n
        return n

    def seed(self, offset: int = 0) -> int:
        return (self.cfg.root_seed + offset) % U64

    def grid(self, T: float, n_records: int = 48) -> TimeGrid:
        return TimeGrid.horizon(T, self.cfg.dt, n_records)

    def simulate(self, label: str, spec: EnsembleSpec, params: ModelParams | None = None) -> PathEnsemble:
        ens = simulate_ensemble(spec, params or self.params, self.threads)
        if self.save_ensembles:
            storage.write_cache(ens, storage.cache_dir() / f"{self.cfg.experiment}-{spec.root_seed}-{label}.cir3")
        return ens

    def verdict(self, ok: bool) -> str:
        return PASS if ok else FAIL


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    return float(x.mean()), float(an.jackknife_mean_se(x))


def _slope_claim(ctx: Context, name: str, times, values, rate: float, window) -> Claim:
    tol = ctx.opt("slope_tolerance", 0.10)
    fit = an.fit_exponential_rate(times, values, window)
    ok = abs(fit.rate + rate) <= tol * rate
    return ctx.report.add(Claim(
        name, ctx.verdict(ok), "analytics.fit_exponential_rate",
        f"|slope - (-{rate:g})| <= {tol:g} * {rate:g} over t in [{window[0]:g}, {window[1]:g}]",
        observed=fit.rate, expected=-rate, detail=f"R^2 = {fit.r2:.6f}",
    ))


def _envelope_claim(ctx: Context, name: str, op: str, times, values, stderr, bound, what: str) -> Claim:
    n_se = ctx.opt("n_se", 3.0)
    excess = values - n_se * stderr - bound
    worst = int(np.argmax(excess))
    ok = bool(np.all(excess <= 1e-12 * np.maximum(1.0, np.abs(bound))))
    return ctx.report.add(Claim(
        name, ctx.verdict(ok), op, f"{what} - {n_se:g} SE <= bound at every recorded t",
        observed=float(values[worst]), expected=float(bound[worst]),
        detail=f"tightest at t = {times[worst]:.6g} (stderr {stderr[worst]:.3g})",
    ))


# ---- experiments ----------------------------------------------------------------


def stationary_check(ctx: Context) -> None:
    p = ctx.params
    g = stationary_gamma(p)
    n = ctx.n_paths(100_000)
    T = ctx.opt("T", 1.0)
    n_se = ctx.opt("n_se", 3.0)
    spec = EnsembleSpec(1, [GammaLaw(g.shape, g.scale)], ctx.grid(T, 8), n, ctx.seed(), ctx.cfg.scheme)
    ens = ctx.simulate("stationary", spec)
    v = ens.coord("v")[-1]
    for order in (1, 2):
        m, se = _mean_se(v**order)
        expected = an.gamma_moment(order, g)
        ctx.report.add(Claim(
            f"stationary-M{order}", ctx.verdict(abs(m - expected) <= n_se * se), "analytics.gamma_moment",
            f"|M{order} - Gamma moment| <= {n_se:g} SE at t = {T:g}", observed=m, expected=expected,
            detail=f"stderr {se:.4g}; initial law Gamma(shape={g.shape:.6g}, scale={g.scale:.6g})",
        ))
    curve = an.moment_curve(ens, 1, "F_v")
    ctx.report.curves.append(Curve("F1_v_stationary", curve.times, curve.values, curve.stderr,
                                   np.full(curve.times.size, g.mean)))

    # mean formula from a constant start, with its own k_v and eta
    mp = validate(p.replace(k_v=ctx.opt("mean_k_v", 0.5), eta=ctx.opt("mean_eta", 0.05)))
    v0 = ctx.opt("mean_v0", 0.03)
    t1 = ctx.opt("mean_t", 1.0)
    ens = ctx.simulate("mean", EnsembleSpec(1, [v0], ctx.grid(t1, 8), n, ctx.seed(), ctx.cfg.scheme), mp)
    m, se = _mean_se(ens.coord("v")[-1])
    expected = an.mean_v(t1, v0, mp)
    ctx.report.add(Claim(
        "mean-formula", ctx.verdict(abs(m - expected) <= n_se * se), "analytics.mean_v",
        f"|E[v_t] - closed form| <= {n_se:g} SE at t = {t1:g}", observed=m, expected=expected,
        detail=f"stderr {se:.4g}; v0 = {v0:g}, k_v = {mp.k_v:g}, eta = {mp.eta:g}, gamma = {mp.gamma:g}",
    ))
    if not p.feller:
        ctx.report.add(Claim(
            "feller-advisory", ADVISORY, "params.validate", "2 k_v eta >= gamma^2",
            observed=2 * p.k_v * p.eta, expected=p.gamma**2,
            detail="Feller condition fails; the shape < 1 Gamma branch is exercised",
        ))
    ctx.report.ledger = {"shape": g.shape, "scale": g.scale, "M1": an.gamma_moment(1, g), "M2": an.gamma_moment(2, g)}


def v_contraction(ctx: Context) -> None:
    p = ctx.params
    a, b = ctx.opt("v0_pair", [0.0, 2.0])
    T = ctx.opt("T", 3.0)
    window = tuple(ctx.opt("fit_window", [0.25, T]))
    scheme = ctx.opt("coupling_scheme", "euler_full_truncation")
    c = simulate_coupled("v_coupling", ([a], [b]), ctx.grid(T), p, ctx.n_paths(100_000), ctx.seed(),
                         scheme, ctx.threads)
    d = np.abs(c.delta)
    m, se = d.mean(axis=1), an.jackknife_mean_se(d, axis=1)
    bound = abs(a - b) * np.exp(-p.k_v * c.times)
    ctx.report.curves.append(Curve("abs_delta_v", c.times, m, se, bound))
    _slope_claim(ctx, "v-contraction-slope", c.times, m, p.k_v, window)
    # comparison property: the sign of Delta should not flip before it first hits 0
    s = np.sign(c.delta)
    hit = np.cumsum(s == 0, axis=0) > 0
    flipped = ((s * s[0]) < 0) & ~hit
    frac = float(flipped.any(axis=0).mean())
    ctx.report.add(Claim(
        "v-sign-flips", ADVISORY, "sde.simulate_coupled", "fraction of paths whose Delta changes sign before 0",
        observed=frac, expected=0.0, detail="discrete schemes may cross; exact solutions cannot",
    ))


def theta_contraction(ctx: Context) -> None:
    p = ctx.params
    a, b = ctx.opt("theta0_pair", [0.0, 2.0])
    v0 = ctx.opt("v0", p.eta)
    T = ctx.opt("T", 3.0)
    window = tuple(ctx.opt("fit_window", [0.25, T]))
    c = simulate_coupled("theta_coupling", ([a, v0], [b, v0]), ctx.grid(T), p, ctx.n_paths(100_000),
                         ctx.seed(), ctx.cfg.scheme, ctx.threads)
    d = np.abs(c.delta)
    m, se = d.mean(axis=1), an.jackknife_mean_se(d, axis=1)
    bound = m[0] * np.exp(-p.k_theta * c.times)
    ctx.report.curves.append(Curve("abs_delta_theta", c.times, m, se, bound))
    _envelope_claim(ctx, "theta-envelope", "sde.simulate_coupled", c.times, m, se, bound, "E|Delta_t|")
    _slope_claim(ctx, "theta-contraction-slope", c.times, m, p.k_theta, window)


def r_contraction(ctx: Context) -> None:
    p = ctx.params
    a, b = ctx.opt("R0_pair", [0.0, 2.0])
    th0 = ctx.opt("theta0", p.zeta)
    v0 = ctx.opt("v0", p.eta)
    T = ctx.opt("T", 3.0)
    window = tuple(ctx.opt("fit_window", [0.25, T]))
    c = simulate_coupled("r_coupling", ([a, th0, v0], [b, th0, v0]), ctx.grid(T), p, ctx.n_paths(10_000),
                         ctx.seed(), ctx.cfg.scheme, ctx.threads)
    d = np.abs(c.delta)
    m, se = d.mean(axis=1), an.jackknife_mean_se(d, axis=1)
    bound = m[0] * np.exp(-p.k * c.times)
    ctx.report.curves.append(Curve("abs_delta_R", c.times, m, se, bound))
    _envelope_claim(ctx, "R-envelope", "sde.simulate_coupled", c.times, m, se, bound, "E|Delta_t|")
    _slope_claim(ctx, "R-contraction-slope", c.times, m, p.k, window)


def v_ergodic_rate(ctx: Context) -> None:
    p = ctx.params
    g = stationary_gamma(p)
    v0 = ctx.opt("v0", 2.0)
    T = ctx.opt("T", 5.0)
    n = ctx.n_paths(100_000)
    orders = ctx.opt("orders", [1.0, 2.0])
    ens = ctx.simulate("v", EnsembleSpec(1, [v0], ctx.grid(T, 50), n, ctx.seed(), ctx.cfg.scheme))
    cloud = gamma_cloud(g, n, ctx.seed())
    v = ens.coord("v")
    rows = []
    ledger = {}
    for q in orders:
        est = [wasserstein_1d(q, v[i], cloud, with_se=True) for i in range(v.shape[0])]
        w = np.array([e.value for e in est])
        se = np.array([e.stderr for e in est])
        c = an.bound_C_p_v(q, p, v0**q)
        rate = an.wasserstein_rate(q, p)
        bound = c ** (1.0 / q) * np.exp(-rate * ens.times)
        name = f"W{q:g}_v_vs_stationary"
        ctx.report.curves.append(Curve(name, ens.times, w, se, bound))
        rows += [(t, f"wasserstein_1d_p{q:g}", wi, si) for t, wi, si in zip(ens.times, w, se)]
        _envelope_claim(ctx, f"ergodic-rate-p{q:g}", "transport.wasserstein_1d + analytics.bound_C_p_v",
                        ens.times, w, se, bound, f"W_{q:g}")
        ledger[f"p{q:g}"] = {"C_p_v": c, "rate": rate, "x": v0**q}
    ctx.report.distances.append(("distances_v", rows))
    ctx.report.ledger = ledger


def moment_bounds_v(ctx: Context) -> None:
    p = ctx.params
    v0 = ctx.opt("v0", 2.0)
    q = ctx.opt("p", 2.0)
    T = ctx.opt("T", 10.0)
    ens = ctx.simulate("v", EnsembleSpec(1, [v0], ctx.grid(T, 50), ctx.n_paths(100_000), ctx.seed(), ctx.cfg.scheme))
    _moment_claim(ctx, ens, q, "F_v", an.bound_Ctilde_p_v(q, p, v0**q), "analytics.bound_Ctilde_p_v")
    ctx.report.ledger = an.bound_ledger(q, p, v0**q).to_dict()


def _moment_claim(ctx: Context, ens, q: float, kind: str, bound: float, op: str, detail: str = "") -> None:
    curve = an.moment_curve(ens, q, kind)
    b = np.full(curve.times.size, bound)
    ctx.report.curves.append(Curve(f"{kind}_p{q:g}", curve.times, curve.values, curve.stderr, b))
    c = _envelope_claim(ctx, f"sup-{kind}-p{q:g}", op, curve.times, curve.values, curve.stderr, b,
                        f"{kind}(t)")
    if detail:
        c.detail = f"{c.detail}; {detail}"


def moment_bounds_theta(ctx: Context) -> None:
    p = ctx.params
    th0 = ctx.opt("theta0", 2.0)
    v0 = ctx.opt("v0", 2.0)
    q = ctx.opt("p", 2.0)
    T = ctx.opt("T", 10.0)
    ens = ctx.simulate("theta", EnsembleSpec(2, [th0, v0], ctx.grid(T, 50), ctx.n_paths(100_000), ctx.seed(),
                                             ctx.cfg.scheme))
    ct = an.bound_Ctilde_p_theta(q, p, th0**q, v0**q)
    _moment_claim(ctx, ens, q, "F_theta", ct, "analytics.bound_C_p_theta")
    _moment_claim(ctx, ens, q, "F_v", an.bound_Ctilde_p_v(q, p, v0**q), "analytics.bound_Ctilde_p_v")
    ctx.report.ledger = an.bound_ledger(q, p, v0**q, th0**q).to_dict()


def moment_bounds_r(ctx: Context) -> None:
    p = ctx.params
    r0 = ctx.opt("R0", 2.0)
    th0 = ctx.opt("theta0", 2.0)
    v0 = ctx.opt("v0", 2.0)
    q = ctx.opt("p", 2.0)
    T = ctx.opt("T", 10.0)
    ens = ctx.simulate("R", EnsembleSpec(3, [r0, th0, v0], ctx.grid(T, 50), ctx.n_paths(10_000), ctx.seed(),
                                         ctx.cfg.scheme))
    cr = an.bound_Ctilde_p_R(q, p, r0**q, th0**q, v0**q)
    _moment_claim(ctx, ens, q, "F_R", cr, "analytics.bound_Ctilde_p_R",
                  "reconstructed constant, not one stated in closed form by the theory")
    _moment_claim(ctx, ens, q, "F_theta", an.bound_Ctilde_p_theta(q, p, th0**q, v0**q), "analytics.bound_C_p_theta")
    ctx.report.ledger = {**an.bound_ledger(q, p, v0**q, th0**q).to_dict(), "Ctilde_p_R_reconstructed": cr}
    ctx.report.notes.append("Ctilde_p_R is reconstructed by the theta-case argument with k, alpha in place "
                            "of k_theta, alpha*beta; treat its verdict as a check of that reconstruction.")


def _residual_claim(ctx: Context, name: str, table, detail: str) -> None:
    ctx.report.residuals.append((f"residuals_{name}", table))
    ctx.report.add(Claim(
        f"generator-residual-{name}", ctx.verdict(table.consistent), "generator.stationarity_residual",
        f"|z| <= {table.threshold:g} for all {len(table.rows)} test functions",
        observed=table.max_abs_z, expected=0.0, detail=detail,
    ))


def generator_residual(ctx: Context) -> None:
    p = ctx.params
    g = stationary_gamma(p)
    n = ctx.n_paths(100_000)
    thr = ctx.opt("z_threshold", 3.0)
    cloud = gamma_cloud(g, n, ctx.seed())
    _residual_claim(ctx, "v-gamma", stationarity_residual(cloud, default_family(cloud), p, thr),
                    "exact Gamma samples, one-factor generator")
    T = ctx.opt("T", 15.0)
    ens = ctx.simulate("theta", EnsembleSpec(2, [p.zeta, GammaLaw(g.shape, g.scale)], ctx.grid(T, 3), n,
                                             ctx.seed(), ctx.cfg.scheme))
    x = ens.states[-1]
    _residual_claim(ctx, "two-factor", stationarity_residual(x, default_family(x), p, thr),
                    f"two-factor ensemble at T = {ens.grid.T:g}, dt = {ens.grid.dt:g}")
    # negative control: mass near 10 eta, phi = v on a plateau covering it, must be flagged
    far = 10.0 * p.eta * (1.0 + 0.01 * np.linspace(-1.0, 1.0, 1000))
    probe = BumpProduct((Factor1D(0.0, 20.0 * p.eta, 2.0 * p.eta, 1),), 1.0 / p.eta, "v-plateau")
    tab = stationarity_residual(far, [probe], p, thr)
    ctx.report.residuals.append(("residuals_negative_control", tab))
    ctx.report.add(Claim(
        "negative-control", ctx.verdict(not tab.consistent), "generator.stationarity_residual",
        f"expect |z| > {thr:g} for samples far from stationarity", observed=tab.max_abs_z, expected=thr,
        detail=f"samples near 10 eta; mean G phi = {tab.rows[0].mean:.6g}",
    ))
    ctx.report.notes.append("The residual test is a necessary condition for invariance only.")


def _w1_claim(ctx: Context, name: str, x: np.ndarray, y: np.ndarray, scale: float) -> Claim:
    n_se = ctx.opt("n_se", 3.0)
    rel = ctx.opt("rel_threshold", 0.02)
    est = wasserstein_1d(1.0, x, y, with_se=True)
    thr = max(n_se * est.stderr, rel * scale)
    return ctx.report.add(Claim(
        name, ctx.verdict(est.value <= thr), "transport.wasserstein_1d",
        f"W1 <= max({n_se:g} SE, {rel:g} * {scale:g})", observed=est.value, expected=thr,
        detail=f"stderr {est.stderr:.3g}",
    ))


def _distance_rows(times, a: np.ndarray, b: np.ndarray, label: str) -> list[tuple]:
    rows = []
    for i, t in enumerate(times):
        e = wasserstein_1d(1.0, a[i], b[i], with_se=True)
        rows.append((t, label, e.value, e.stderr))
    return rows


def two_factor_limit(ctx: Context) -> None:
    p = ctx.params
    g = stationary_gamma(p)
    a, b = ctx.opt("theta0_pair", [0.0, 5.0])
    T = ctx.opt("T", 10.0 / min(p.k_theta, p.k_v))
    n = ctx.n_paths(100_000)
    vlaw = GammaLaw(g.shape, g.scale)
    grid = ctx.grid(T, 20)
    e1 = ctx.simulate("a", EnsembleSpec(2, [a, vlaw], grid, n, ctx.seed(0), ctx.cfg.scheme))
    e2 = ctx.simulate("b", EnsembleSpec(2, [b, vlaw], grid, n, ctx.seed(1), ctx.cfg.scheme))
    th1, th2 = e1.coord("theta"), e2.coord("theta")
    rows = _distance_rows(e1.times, th1, th2, "wasserstein_1d_theta")
    sl = wasserstein_sliced(1.0, e1.states[-1][:4096], e2.states[-1][:4096], 128, ctx.seed())
    rows.append((e1.times[-1], "sliced_joint_n4096", sl.value, sl.spread))
    ctx.report.distances.append(("distances_theta", rows))
    _w1_claim(ctx, "theta-limit-independence", th1[-1], th2[-1], p.zeta)
    ctx.report.notes.append("Ensembles use distinct seeds, so W1 compares laws rather than coupled paths.")


def three_factor_limit(ctx: Context) -> None:
    p = ctx.params
    g = stationary_gamma(p)
    a, b = ctx.opt("R0_pair", [0.0, 5.0])
    burn = ctx.opt("burn_in", 10.0 / min(p.k_theta, p.k_v))
    T = ctx.opt("T", 10.0 / min(p.k, p.k_theta, p.k_v))
    n = ctx.n_paths(10_000)
    pre = ctx.simulate("burn", EnsembleSpec(2, [p.zeta, GammaLaw(g.shape, g.scale)], ctx.grid(burn, 2), n,
                                            ctx.seed(0), ctx.cfg.scheme))
    tv = pre.states[-1]
    grid = ctx.grid(T, 20)
    ens = []
    for i, r0 in enumerate((a, b)):
        init = np.column_stack([np.full(n, float(r0)), tv])
        spec = EnsembleSpec(3, [r0, p.zeta, p.eta], grid, n, ctx.seed(1 + i), ctx.cfg.scheme, init)
        ens.append(ctx.simulate(f"R{i}", spec))
    r1, r2 = ens[0].coord("R"), ens[1].coord("R")
    ctx.report.distances.append(("distances_R", _distance_rows(ens[0].times, r1, r2, "wasserstein_1d_R")))
    _w1_claim(ctx, "R-limit-independence", r1[-1], r2[-1], p.zeta)
    ctx.report.notes.append("(theta, v) initials come from a two-factor burn-in shared by both R-ensembles.")


PLANS: dict[str, Callable[[Context], None]] = {
    "stationary-check": stationary_check,
    "v-contraction": v_contraction,
    "theta-contraction": theta_contraction,
    "r-contraction": r_contraction,
    "v-ergodic-rate": v_ergodic_rate,
    "moment-bounds-v": moment_bounds_v,
    "moment-bounds-theta": moment_bounds_theta,
    "moment-bounds-r": moment_bounds_r,
    "generator-residual": generator_residual,
    "two-factor-limit-independence": two_factor_limit,
    "three-factor-limit-independence": three_factor_limit,
}
