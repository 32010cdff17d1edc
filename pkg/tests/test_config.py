"""
Tests for configuration loading and layering
"""

import json

import pytest

from bcv.config import BcvConfig, ExperimentConfig, load_bcv_config, load_experiment_config
from bcv.errors import ConfigError


def test_defaults():
    config = BcvConfig()
    assert config.mode == "kfold"
    assert config.folds == 10
    assert config.C == 0.01
    assert config.patience == 3
    assert config.restarts == 10
    assert config.repeats is None
    assert BcvConfig(repeats=4).repeats == 4
    assert config.training_proportion == pytest.approx(0.9)
    assert BcvConfig(mode="bernoulli", w=0.8).training_proportion == 0.8


def test_infinite_patience_becomes_none():
    assert BcvConfig(patience=float("inf")).patience is None
    assert BcvConfig(patience=None).patience is None
    assert BcvConfig(patience=2.0).patience == 2


@pytest.mark.parametrize(
    "overrides",
    [
        {"mode": "loo"},
        {"folds": 1},
        {"w": 1.0},
        {"C": 0.0},
        {"penalty_form": "cubic"},
        {"patience": 0},
        {"restarts": 0},
        {"repeats": 0},
        {"max_frontier": 0},
    ],
)
def test_invalid_values_raise(overrides):
    with pytest.raises(ConfigError):
        BcvConfig(**overrides)


def test_unknown_keys_raise():
    with pytest.raises(ConfigError):
        BcvConfig.from_dict({"fold": 5})
    with pytest.raises(ConfigError):
        BcvConfig().merged(lamda=0.1)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"settings": "balanced-1"})


def test_merged_ignores_unset_values():
    config = BcvConfig().merged(folds=5, C=None)
    assert config.folds == 5
    assert config.C == 0.01


def test_file_overrides_flags_and_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("BCV_WORKERS", "3")
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"bcv": {"folds": 5, "seed": 7}}))

    config = load_bcv_config(path, {"folds": 4, "C": 0.02})
    assert config.folds == 5
    assert config.seed == 7
    assert config.C == 0.02
    assert config.workers == 3

    assert load_bcv_config(None, {"workers": 2}).workers == 2


def test_flat_file_is_accepted(tmp_path):
    path = tmp_path / "flat.json"
    path.write_text(json.dumps({"patience": 5, "penalty_form": "log"}))
    config = load_bcv_config(path)
    assert config.patience == 5
    assert config.penalty_form == "log"


def test_bad_environment_and_json(tmp_path, monkeypatch):
    monkeypatch.setenv("BCV_WORKERS", "many")
    with pytest.raises(ConfigError):
        load_bcv_config()
    monkeypatch.delenv("BCV_WORKERS")

    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_bcv_config(path)
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_bcv_config(path)


def test_experiment_config_layering(tmp_path):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps({"setting": "poly-2", "sizes": [50, 100], "bcv": {"folds": 5}}))
    config = load_experiment_config(path, {"setting": "balanced-1", "reps": 3}, {"C": 0.05})
    assert config.setting == "poly-2"
    assert config.sizes == (50, 100)
    assert config.reps == 3
    assert config.bcv.folds == 5
    assert config.bcv.C == 0.05


def test_experiment_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(setting="balanced-9")
    with pytest.raises(ConfigError):
        ExperimentConfig(balance="skewed")
    with pytest.raises(ConfigError):
        ExperimentConfig(methods=("bcv", "spectral"))
    with pytest.raises(ConfigError):
        ExperimentConfig(sizes=())
    with pytest.raises(ConfigError):
        ExperimentConfig(setting="custom")
    config = ExperimentConfig(methods=["bcv", "projection"], bcv={"folds": 4})
    assert config.methods == ("bcv", "projection")
    assert config.bcv.folds == 4


def test_experiment_config_round_trip():
    config = ExperimentConfig(setting="balanced-2", sizes=(100, 200), methods=("bcv", "bimodularity"))
    data = config.to_dict()
    assert data["sizes"] == [100, 200]
    assert ExperimentConfig.from_dict(json.loads(json.dumps(data))) == config
