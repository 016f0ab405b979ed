from __future__ import annotations

import json

import pytest

from cir3.experiments import (
    EXPERIMENTS, ConfigError, ExperimentConfig, ExperimentError, dump_config, format_report, load_config, run,
    run_suite,
)
from cir3.experiments.config import load_raw
from cir3.params import PRESETS, ModelParams

# small sizes: these tests check plumbing and report shape, not verdicts
FAST = {
    "stationary-check": {},
    "v-contraction": {"T": 1.0},
    "theta-contraction": {"T": 1.0},
    "r-contraction": {"T": 1.0},
    "v-ergodic-rate": {"T": 1.0},
    "moment-bounds-v": {"T": 1.0},
    "moment-bounds-theta": {"T": 1.0},
    "moment-bounds-r": {"T": 1.0},
    "generator-residual": {"T": 1.0},
    "two-factor-limit-independence": {"T": 1.0},
    "three-factor-limit-independence": {"T": 1.0, "burn_in": 1.0},
}


def test_every_experiment_has_a_fast_config():
    assert set(FAST) == set(EXPERIMENTS)


@pytest.mark.parametrize("name", EXPERIMENTS)
def test_experiment_runs_and_reports(name, tmp_path):
    cfg = ExperimentConfig(name, n_paths=500, root_seed=3, options=FAST[name])
    report = run(cfg)
    assert report.claims and all(c.verdict in ("pass", "fail", "advisory") for c in report.claims)
    out = report.write(tmp_path)
    data = json.loads((out / "report.json").read_text())
    assert data["experiment"] == name and data["config"]["resolved"]["n_paths"] == 500
    for group in ("curves", "distances", "residuals"):
        for fname in data[group].values():
            assert (out / fname).exists()
    assert "wall_clock_s" in json.loads((out / "timing.json").read_text())
    assert name in format_report(data)


def test_reports_are_deterministic():
    cfg = ExperimentConfig("theta-contraction", n_paths=300, root_seed=5, options={"T": 0.5})
    assert run(cfg).to_json() == run(cfg).to_json()
    other = run(cfg.with_overrides(root_seed=6)).to_json()
    assert other != run(cfg).to_json()


def test_tolerance_injection_fails_claim():
    cfg = ExperimentConfig("v-contraction", n_paths=500, options={"T": 1.0, "slope_tolerance": 0.0})
    report = run(cfg)
    assert not report.passed and "v-contraction:v-contraction-slope" in report.failed_claims


def test_suite_result():
    empty = run_suite([])
    assert empty.passed and empty.exit_code == 0
    res = run_suite([ExperimentConfig("stationary-check", n_paths=200),
                     ExperimentConfig("v-contraction", n_paths=200, options={"T": 1.0, "slope_tolerance": 0.0})])
    assert res.exit_code == 1 and res.failed_claims == ["v-contraction:v-contraction-slope"]


def test_experiment_error_carries_partial_report():
    cfg = ExperimentConfig("v-ergodic-rate", n_paths=100, options={"orders": [0.5]})
    with pytest.raises(ExperimentError) as info:
        run(cfg)
    assert info.value.experiment == "v-ergodic-rate" and info.value.partial is not None


@pytest.mark.parametrize("suffix", [".toml", ".json"])
def test_config_roundtrip(tmp_path, suffix):
    cfg = ExperimentConfig("r-contraction", ModelParams(k=2.0, rho_v=-0.1), "euler_full_truncation", 0.01, 1000, 99,
                           "default", {"T": 2.0, "R0_pair": [0.0, 1.0]})
    path = dump_config(cfg, tmp_path / f"c{suffix}")
    assert load_config(path) == cfg


def test_config_preset_and_extra_keys(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('[experiment]\nname = "stationary-check"\npreset = "stress"\nT = 2.0\n[model]\nk = 3.0\n')
    cfg = load_config(path)
    assert cfg.model == PRESETS["stress"].replace(k=3.0) and cfg.options == {"T": 2.0}


@pytest.mark.parametrize("data,field", [
    ({"experiment": {"name": "nope"}}, "experiment.name"),
    ({"experiment": {"name": "v-contraction"}, "model": {"rho_theta": 0.8, "rho_v": 0.7}}, "model.rho_theta"),
    ({"experiment": {"name": "v-contraction"}, "model": {"gamma": -1.0}}, "model.gamma"),
    ({"experiment": {"name": "v-contraction"}, "scheme": {"name": "milstein"}}, "scheme.name"),
    ({"experiment": {"name": "v-contraction"}, "scheme": {"dt": 0}}, "scheme.dt"),
    ({"experiment": {"name": "v-contraction", "seed": -4}}, "experiment.seed"),
    ({"experiment": {"name": "v-contraction", "n_paths": 1}}, "experiment.n_paths"),
    ({"experiment": {"name": "v-contraction", "preset": "calm"}}, "experiment.preset"),
])
def test_config_errors_name_the_field(data, field):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict(data)
    assert info.value.field == field


def test_unparseable_config(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[model\n")
    with pytest.raises(ConfigError):
        load_raw(bad)
    with pytest.raises(ConfigError):
        load_raw(tmp_path / "missing.toml")
