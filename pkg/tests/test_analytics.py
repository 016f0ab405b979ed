from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from cir3 import analytics as an
from cir3.noise import GammaLaw
from cir3.params import GammaStationary, ModelParams, stationary_gamma
from cir3.sde import PathEnsemble, TimeGrid, simulate_coupled

ONES = ModelParams(alpha=1.0, gamma=1.0, rho_theta=0.0, rho_v=0.0)


def _const_ensemble(values, factors=2, n_rec=3, n_paths=5):
    states = np.broadcast_to(np.asarray(values, dtype=float), (n_rec, n_paths, factors)).copy()
    return PathEnsemble(TimeGrid(0.5, n_rec - 1), "exact_v_euler_rest", n_paths, states, 0, factors)


def test_gamma_moment_matches_scipy():
    rng = np.random.default_rng(0)
    for _ in range(50):
        g = GammaStationary(rng.uniform(0.1, 20), rng.uniform(0.05, 3))
        assert an.gamma_moment(0.0, g) == 1.0
        for p in (1, 2, 3):
            assert an.gamma_moment(p, g) == pytest.approx(stats.gamma(g.shape, scale=g.scale).moment(p), rel=1e-12)
        # seven recursion steps from a dyadic p (so p + j is exact)
        p = rng.integers(0, 32) / 8
        m = an.gamma_moment(p, g)
        for j in range(7):
            m *= (g.shape + p + j) * g.scale
        ref = an.gamma_moment(p + 7, g)
        assert abs(m - ref) <= 8 * np.spacing(ref)
    assert an.gamma_moment(-0.5, GammaStationary(2.0, 0.5)) == pytest.approx(
        stats.gamma(2.0, scale=0.5).expect(lambda x: x**-0.5), rel=1e-10)
    assert an.gamma_moment(2, GammaStationary(2.0, 0.5)) == pytest.approx(1.5, rel=1e-14)


def test_mean_v_examples_and_semigroup():
    p = ModelParams(k_v=0.5, eta=0.05)
    assert an.mean_v(0.0, 0.03, p) == 0.03
    assert an.mean_v(1.0, 0.03, p) == pytest.approx(0.0378694, abs=5e-8)
    assert an.mean_v(3.7, p.eta, p) == p.eta
    rng = np.random.default_rng(1)
    for _ in range(200):
        s, t, x = rng.uniform(0, 3, 3)
        a = an.mean_v(s + t, x, p)
        b = an.mean_v(t, an.mean_v(s, x, p), p)
        assert abs(a - b) <= 8 * np.spacing(max(a, b))
    with pytest.raises(ValueError):
        an.mean_v(-1.0, 0.1, p)
    assert an.mean_theta(0.0, 2.0, p) == 2.0


def test_jackknife_equals_leave_one_out():
    x = np.random.default_rng(2).exponential(size=40)
    loo = np.array([np.delete(x, i).mean() for i in range(x.size)])
    n = x.size
    brute = math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    assert float(an.jackknife_mean_se(x)) == pytest.approx(brute, rel=1e-12)


def test_moment_curve_constant():
    ens = _const_ensemble([2.0, 3.0])
    c = an.moment_curve(ens, 2.0, "F_theta")
    assert np.all(c.values == 4.0) and np.all(c.stderr == 0.0)
    g = an.moment_curve(ens, 1.5, "G_theta")
    assert np.allclose(g.values, 2.0**1.5 * 3.0)
    with pytest.raises(an.KindDimensionMismatch):
        an.moment_curve(ens, 2.0, "F_R")
    with pytest.raises(ValueError):
        an.moment_curve(ens, 0.5, "F_v")


def test_C_p_v_hand_values():
    # all-ones model with gamma = 1: stationary Gamma(2, 1/2), M1 = 1, M2 = 3/2
    assert an.bound_C_p_v(1.0, ONES, 1.0) == 2.0
    assert an.bound_C_p_v(2.0, ONES, 1.0) == pytest.approx(7.0, rel=1e-15)
    assert an.bound_Ctilde_p_v(2.0, ONES, 1.0) == pytest.approx(17.0, rel=1e-15)
    assert an.bound_Ctilde_p_v(1.0, ONES, 0.5) == pytest.approx(0.5 + 2.0, rel=1e-15)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 2.5, 3.0, 4.0])
def test_C_p_v_monotone_and_finite(p):
    rng = np.random.default_rng(int(p * 10))
    params = ModelParams(gamma=0.8)
    m = an.gamma_moment(p, stationary_gamma(params))
    for _ in range(100):
        a, b = np.sort(rng.uniform(0, 10, 2))
        ca, cb = an.bound_C_p_v(p, params, a), an.bound_C_p_v(p, params, b)
        assert 0.0 < ca <= cb and math.isfinite(cb)
        assert an.bound_Ctilde_p_v(p, params, a) >= m


def test_C_p_theta_hand_values():
    c, f = an.bound_C_p_theta(2.0, ONES, 1.0)
    assert c == pytest.approx(1.5 * 9.5, rel=1e-15)
    assert f(0.0) == c and f(100.0) == 100.0
    with pytest.raises(an.OrderTooLow):
        an.bound_C_p_theta(1.5, ONES, 1.0)


def test_Ctilde_R_hand_value():
    young = (1.0 + 2.0) / 2.0 / 2.0
    expected = 2.0 * young * (14.25 + 0.5 * 17.0)
    assert an.bound_Ctilde_p_R(2.0, ONES, 0.0, 1.0, 1.0) == pytest.approx(expected, rel=1e-14)
    assert an.bound_Ctilde_p_R(2.0, ONES, 1e6, 1.0, 1.0) == 1e6
    with pytest.raises(an.OrderTooLow):
        an.bound_Ctilde_p_R(1.0, ONES, 0.0, 1.0, 1.0)


def test_wasserstein_rate():
    p = ModelParams(k_v=2.0)
    assert an.wasserstein_rate(1.0, p) == 2.0
    assert an.wasserstein_rate(2.0, p) == 1.0
    assert an.wasserstein_rate(2.5, p) == pytest.approx(0.3 * 2.0, rel=1e-15)
    with pytest.raises(ValueError):
        an.wasserstein_rate(0.5, p)


def test_bound_ledger_fields():
    led = an.bound_ledger(2.0, ONES, 1.0, 0.0)
    assert led.C_p_v == pytest.approx(7.0) and led.Ctilde_p_theta == pytest.approx(14.25)
    assert an.bound_ledger(1.0, ONES, 1.0).C_p_theta is None


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_coupling_obeys_C_p_v(p):
    params = ModelParams()
    g = stationary_gamma(params)
    c = simulate_coupled("v_coupling", ([2.0], [GammaLaw(g.shape, g.scale)]), TimeGrid.horizon(3.0, 2.0**-7, 12),
                         params, 20_000, 4)
    d = np.abs(c.delta) ** p
    m = d.mean(axis=1)
    se = d.std(axis=1, ddof=1) / math.sqrt(d.shape[1])
    bound = an.bound_C_p_v(p, params, 2.0**p) * np.exp(-an.wasserstein_rate(p, params) * c.times)
    assert np.all(m - 3 * se <= bound)


def test_linear_integral_bound():
    t = np.linspace(0, 5, 51)
    flat = an.MomentCurve(1.0, t, np.full(t.size, 2.0), np.zeros(t.size), "F_v")
    assert an.check_linear_integral_bound(flat, 2.0, 1.0).holds
    # exact solution of F' = A - B F from F(0) = 10
    sol = an.MomentCurve(1.0, t, 1.0 + 9.0 * np.exp(-t), np.zeros(t.size), "F_v")
    v = an.check_linear_integral_bound(sol, 1.0, 1.0)
    assert v.holds and v.bound == 10.0
    bumped = an.MomentCurve(1.0, t, sol.values.copy(), np.zeros(t.size), "F_v")
    bumped.values[20] = 50.0
    v = an.check_linear_integral_bound(bumped, 1.0, 1.0)
    assert not v.holds and v.at_time == t[20]
    with pytest.raises(ValueError):
        an.check_linear_integral_bound(flat, 0.0, 1.0)


def test_fit_exponential_rate():
    t = np.linspace(0, 3, 31)
    assert an.fit_exponential_rate(t, 5 * np.exp(-2 * t)).rate == pytest.approx(-2.0, abs=1e-9)
    assert an.fit_exponential_rate(t, np.full(t.size, 3.0)).rate == pytest.approx(0.0, abs=1e-12)
    assert an.fit_exponential_rate(t, np.exp(-t), (1.0, 2.0)).rate == pytest.approx(-1.0, abs=1e-9)
    with pytest.raises(an.NonPositiveValue):
        an.fit_exponential_rate(t, np.zeros(t.size))
    with pytest.raises(ValueError):
        an.fit_exponential_rate(t, np.exp(-t), (10.0, 11.0))
