from __future__ import annotations

import math

import numpy as np
import pytest

from cir3.params import (
    PRESETS, CorrelationOutOfRange, ModelParams, NonFiniteParameter, NonPositiveParameter, ParameterError,
    RhoBarNotPositive, stationary_gamma, validate,
)


def test_zero_correlations_give_unit_rho_bar():
    p = validate(ModelParams(rho_theta=0.0, rho_v=0.0))
    assert p.rho_bar == 1.0


def test_rho_bar_value():
    p = validate(ModelParams(rho_theta=0.6, rho_v=0.0))
    assert math.isclose(p.rho_bar, 0.64, rel_tol=1e-15)


def test_rho_bar_negative_rejected():
    with pytest.raises(RhoBarNotPositive) as info:
        validate(ModelParams(rho_theta=0.8, rho_v=0.7))
    assert math.isclose(info.value.rho_bar, -0.13, abs_tol=1e-12)
    assert info.value.field == "rho_theta"


@pytest.mark.parametrize("name", ["k", "k_theta", "k_v", "alpha", "beta", "gamma", "zeta", "eta"])
def test_non_positive_named(name):
    with pytest.raises(NonPositiveParameter) as info:
        validate(ModelParams().replace(**{name: 0.0}))
    assert info.value.field == name


def test_non_finite_and_out_of_range():
    with pytest.raises(NonFiniteParameter):
        validate(ModelParams(k=math.nan))
    with pytest.raises(NonFiniteParameter):
        validate(ModelParams(eta=math.inf))
    with pytest.raises(CorrelationOutOfRange) as info:
        validate(ModelParams(rho_v=1.5))
    assert info.value.field == "rho_v"


def test_validate_idempotent():
    p = ModelParams()
    assert validate(validate(p)) is p


def test_from_mapping_rejects_unknown_and_non_numeric():
    with pytest.raises(ParameterError):
        ModelParams.from_mapping({"kappa": 1.0})
    with pytest.raises(ParameterError) as info:
        ModelParams.from_mapping({"k": "fast"})
    assert info.value.field == "k"
    assert ModelParams.from_mapping({"k": 2}).k == 2.0


def test_stationary_gamma_examples():
    g = stationary_gamma(ModelParams(k_v=1.0, eta=1.0, gamma=math.sqrt(2.0)))
    assert math.isclose(g.shape, 1.0, rel_tol=1e-15) and math.isclose(g.scale, 1.0, rel_tol=1e-15)
    g = stationary_gamma(ModelParams(k_v=1.0, eta=1.0, gamma=1.0))
    assert (g.shape, g.scale) == (2.0, 0.5)


def test_stationary_mean_is_eta():
    rng = np.random.default_rng(3)
    for _ in range(100):
        p = ModelParams(k_v=rng.uniform(0.05, 20), eta=rng.uniform(0.01, 10), gamma=rng.uniform(0.05, 5))
        g = stationary_gamma(p)
        assert abs(g.mean - p.eta) <= 4 * np.spacing(p.eta)


def test_presets():
    assert PRESETS["default"].feller
    stress = PRESETS["stress"]
    assert not stress.feller and stationary_gamma(stress).shape == 0.5
