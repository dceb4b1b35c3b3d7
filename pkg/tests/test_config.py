from pathlib import Path

import pytest
import yaml
from pydantic import ValidationError

from peerfx_kit.config.settings import PeerfxSettings
from peerfx_kit.datamodel.run_config import RunConfig
from peerfx_kit.datamodel.sem_params import SemParams
from peerfx_kit.datamodel.specs import EstimatorName, GraphModel, GraphSpec
from peerfx_kit.datamodel.train_config import TrainConfig


def _write(tmp_path: Path, payload: dict) -> Path:
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(payload))
    return path


def test_run_config_from_yaml(tmp_path):
    path = _write(
        tmp_path,
        {
            "seeds": [3, 4],
            "dataset": {
                "graph": {"model": "barabasi_albert", "n": 50, "m": 2},
                "d": 2,
                "params": {"beta": 0.3, "gamma": [0.1, 0.2]},
            },
            "stage1": {"epochs": 5, "hidden": [16, 16]},
            "lambda_a": 0.05,
            "estimators": ["naive", "dig2rsi"],
        },
    )
    config = RunConfig.from_yaml(path)
    assert config.dataset.graph.model == GraphModel.BARABASI_ALBERT
    assert config.stage1.hidden == (16, 16)
    assert config.estimators == [EstimatorName.NAIVE, EstimatorName.DIG2RSI]

    settings = config.estimation_settings()
    assert settings.stage2_options.lambda_a == 0.05
    assert settings.stage1.epochs == 5


def test_empty_yaml_gives_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    config = RunConfig.from_yaml(path)
    assert config.seeds == [0, 1, 2, 3, 4]
    assert config.estimation_settings().stage2_options.lambda_a == 0.01
    assert config.use_ig


@pytest.mark.parametrize(
    "payload",
    [
        {"unknown_key": 1},
        {"seeds": [1, 1]},
        {"estimators": []},
        {"estimators": ["ces"]},
        {"lambda_a": -0.1},
        {"stage1": {"epochs": 0}},
        {"dataset": {"params": {"beta": 1.0}}},
        {"sweep": {"lambda_grid": [0.0, -0.5]}},
        {"threads": 0},
    ],
)
def test_invalid_run_configs(tmp_path, payload):
    with pytest.raises(ValidationError):
        RunConfig.from_yaml(_write(tmp_path, payload))


def test_coefficient_vectors_must_match_features():
    params = SemParams(gamma=[0.1, 0.2])
    with pytest.raises(ValueError, match="coefficients"):
        params.gamma_vector(3)
    assert params.delta_vector(3).tolist() == [1.0, 1.0, 1.0]


def test_omega_defaults_to_lambda():
    assert SemParams(lambda_u=0.7).omega_value == 0.7
    assert SemParams(lambda_u=0.7, omega=0.2).omega_value == 0.2


@pytest.mark.parametrize(
    "kwargs",
    [
        {"model": "barabasi_albert", "n": 5, "m": 5},
        {"model": "barabasi_albert", "n": 5},
        {"model": "from_file"},
        {"model": "from_file", "path": "/does/not/exist.txt"},
        {"model": "erdos_renyi", "p": 0.0},
    ],
)
def test_invalid_graph_specs(kwargs):
    with pytest.raises(ValidationError):
        GraphSpec(**kwargs)


def test_train_config_is_strict():
    with pytest.raises(ValidationError):
        TrainConfig(learning_rate=0.1)
    with pytest.raises(ValidationError):
        TrainConfig(dropout=1.0)


def test_settings_from_environment(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("PEERFX_THREADS", "4")
    monkeypatch.setenv("PEERFX_LOG_LEVEL", "debug")
    settings = PeerfxSettings()
    assert settings.threads == 4
    assert settings.log_level == "debug"
    assert settings.float_format == "%.17g"


def test_settings_reject_bad_values(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("PEERFX_THREADS", "0")
    with pytest.raises(ValidationError):
        PeerfxSettings()
