from __future__ import annotations

import math

import numpy as np
import pytest

from cir3.generator import (
    ArityMismatch, BumpProduct, Combination, ConstantFunction, Factor1D, apply_generator_R, apply_generator_theta,
    apply_generator_v, default_family, stationarity_residual,
)
from cir3.noise import GammaLaw, gamma_cloud
from cir3.params import ModelParams, stationary_gamma
from cir3.sde import EnsembleSpec, TimeGrid, simulate_ensemble

P = ModelParams()


def _plateau(lo, hi, power=0):
    # wide plateau around the test points so phi equals the monomial there
    return Factor1D(lo, hi, 0.5, power)


def test_factor_derivatives_match_finite_differences():
    rng = np.random.default_rng(0)
    for power in range(4):
        f = Factor1D(0.5, 3.0, 0.6, power)
        x = rng.uniform(0.3, 3.2, 200)
        h = 1e-5
        v, d1, d2 = f.eval(x)
        fp, fm = f.eval(x + h)[0], f.eval(x - h)[0]
        assert np.allclose((fp - fm) / (2 * h), d1, rtol=1e-6, atol=1e-7)
        d1p, d1m = f.eval(x + h)[1], f.eval(x - h)[1]
        assert np.allclose((d1p - d1m) / (2 * h), d2, rtol=1e-5, atol=1e-5)


def test_factor_vanishes_outside_support():
    f = Factor1D(1.0, 2.0, 0.25, 2)
    x = np.array([-1.0, 0.0, 0.99, 1.0, 2.0, 2.5])
    for part in f.eval(x):
        assert np.all(part == 0.0)
    with pytest.raises(ValueError):
        Factor1D(1.0, 2.0, 0.6)


def test_constant_plateau_has_zero_generator():
    phi2 = BumpProduct((_plateau(0.0, 10.0), _plateau(0.0, 10.0)))
    phi3 = BumpProduct((_plateau(0.0, 10.0),) * 3)
    x = np.random.default_rng(1).uniform(2.0, 8.0, (100, 3))
    assert np.all(apply_generator_theta(phi2, x[:, :2], P) == 0.0)
    assert np.all(apply_generator_R(phi3, x, P) == 0.0)


def test_generator_on_monomials():
    x = np.random.default_rng(2).uniform(2.0, 8.0, (100, 3))
    v = x[:, 2]
    phi = BumpProduct((_plateau(0.0, 10.0, 1),))
    assert np.allclose(apply_generator_v(phi, v[:, None], P), P.k_v * (P.eta - v), rtol=1e-13)
    phi = BumpProduct((_plateau(0.0, 10.0, 2),))
    assert np.allclose(apply_generator_v(phi, v[:, None], P), 2 * P.k_v * (P.eta - v) * v + P.gamma**2 * v, rtol=1e-12)
    r, th = x[:, 0], x[:, 1]
    flat = _plateau(0.0, 10.0)
    phi = BumpProduct((_plateau(0.0, 10.0, 1), flat, flat))
    assert np.allclose(apply_generator_R(phi, x, P), P.k * (th - r), rtol=1e-12)
    phi = BumpProduct((_plateau(0.0, 10.0, 2), flat, flat))
    assert np.allclose(apply_generator_R(phi, x, P), 2 * P.k * (th - r) * r + P.alpha**2 * v * r, rtol=1e-12)
    # cross term theta * v picks up no covariance (W2 and W3 are independent)
    phi = BumpProduct((_plateau(0.0, 10.0, 1), _plateau(0.0, 10.0, 1)))
    expected = P.k_theta * (P.zeta - th) * v + P.k_v * (P.eta - v) * th
    assert np.allclose(apply_generator_theta(phi, x[:, 1:], P), expected, rtol=1e-12)


def test_generator_is_linear():
    x = np.random.default_rng(3).uniform(0.1, 3.0, (100, 3))
    phi = BumpProduct((Factor1D(0, 3, 1, 1), Factor1D(0, 3, 1), Factor1D(0, 3, 1, 2)))
    psi = BumpProduct((Factor1D(0, 2, 0.5), Factor1D(0, 3, 1, 1), Factor1D(0, 3, 1)))
    a, b = 0.7, -1.9
    lhs = apply_generator_R(Combination([(a, phi), (b, psi)]), x, P)
    rhs = a * apply_generator_R(phi, x, P) + b * apply_generator_R(psi, x, P)
    assert np.all(np.abs(lhs - rhs) <= 8 * np.spacing(np.maximum(np.abs(lhs), np.abs(rhs))) + 1e-15)


def test_arity_mismatch():
    phi = BumpProduct((Factor1D(0, 1, 0.2),))
    with pytest.raises(ArityMismatch):
        apply_generator_theta(phi, np.ones((3, 2)), P)
    with pytest.raises(ArityMismatch):
        stationarity_residual(np.ones((3, 2)), [phi], P)


def test_residual_on_gamma_samples():
    g = stationary_gamma(P)
    cloud = gamma_cloud(g, 100_000, 7)
    tab = stationarity_residual(cloud, default_family(cloud), P)
    assert len(tab.rows) == 5 and tab.consistent


def test_residual_flags_far_samples():
    far = 10.0 * P.eta + np.linspace(-0.1, 0.1, 500)
    probe = BumpProduct((Factor1D(0.0, 20.0 * P.eta, 2.0 * P.eta, 1),))
    tab = stationarity_residual(far, [probe], P)
    assert tab.rows[0].mean < 0.0 and not tab.consistent


def test_constant_function_residual_is_zero():
    tab = stationarity_residual(np.random.default_rng(4).uniform(size=(50, 2)), [ConstantFunction(3.0, 2)], P)
    assert tab.rows[0].mean == 0.0 and tab.rows[0].stderr == 0.0 and tab.rows[0].z == 0.0


@pytest.mark.parametrize("dt", [1e-2, 1e-3])
def test_generator_matches_one_step_expectation(dt):
    """(E[phi(X_dt)] - phi(x)) / dt -> G phi(x) with a bias of order dt."""
    x0 = np.array([1.2, 0.8])
    phi = BumpProduct((Factor1D(0.0, 4.0, 1.0, 2), Factor1D(0.0, 4.0, 1.0, 1)))
    n = 400_000
    ens = simulate_ensemble(EnsembleSpec(2, list(x0), TimeGrid(dt, 1), n, 5), P)
    diff = (phi.value(ens.states[-1]) - phi.value(x0[None, :])) / dt
    se = diff.std(ddof=1) / math.sqrt(n)
    target = apply_generator_theta(phi, x0[None, :], P)[0]
    assert abs(diff.mean() - target) <= 3.5 * se + 20 * dt


def test_two_factor_ensemble_residual():
    g = stationary_gamma(P)
    ens = simulate_ensemble(EnsembleSpec(2, [P.zeta, GammaLaw(g.shape, g.scale)], TimeGrid.horizon(8.0, 2.0**-6, 2),
                                         50_000, 9), P)
    x = ens.states[-1]
    assert stationarity_residual(x, default_family(x), P).consistent
