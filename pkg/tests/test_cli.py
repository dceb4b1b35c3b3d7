import json
import logging
from pathlib import Path

import pytest
import yaml
from typer.testing import CliRunner

from peerfx_kit.cli.main import app

runner = CliRunner()

DATASET = {
    "graph": {"model": "erdos_renyi", "n": 60, "p": 0.1},
    "d": 2,
    "params": {"beta": 0.5},
}
FAST_NETWORK = {"epochs": 2, "batch_size": 32, "hidden": [8, 8]}


@pytest.fixture(autouse=True)
def restore_logging():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def _config(tmp_path: Path, name: str = "run.yaml", **payload) -> Path:
    path = tmp_path / name
    path.write_text(yaml.safe_dump(payload))
    return path


def _invoke(*args: str):
    return runner.invoke(app, [str(a) for a in args])


def _generate(tmp_path: Path, out: Path) -> Path:
    config = _config(tmp_path, "generate.yaml", seed=3, dataset=DATASET)
    result = _invoke("generate", "--config", config, "--out", out)
    assert result.exit_code == 0, result.output
    return out


def test_no_arguments_prints_help():
    result = _invoke()
    assert result.exit_code in (0, 2)
    assert "generate" in result.output


def test_generate_writes_dataset(tmp_path):
    out = _generate(tmp_path, tmp_path / "data")
    for name in ("graph.txt", "X.csv", "Y.csv", "truth.json", "run_config.json"):
        assert (out / name).is_file()
    truth = json.loads((out / "truth.json").read_text())
    assert truth["seed"] == 3 and truth["params"]["beta"] == 0.5
    echo = json.loads((out / "run_config.json").read_text())
    assert echo["command"] == "generate" and echo["seeds"] == [3]


def test_generate_is_deterministic(tmp_path):
    a = _generate(tmp_path, tmp_path / "a")
    b = _generate(tmp_path, tmp_path / "b")
    for name in ("graph.txt", "X.csv", "Y.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_generate_several_seeds(tmp_path):
    config = _config(tmp_path, dataset=DATASET)
    result = _invoke("generate", "--config", config, "--out", tmp_path / "out", "--seed-override", "1,2")
    assert result.exit_code == 0, result.output
    assert (tmp_path / "out" / "seed_1" / "Y.csv").is_file()
    assert (tmp_path / "out" / "seed_2" / "Y.csv").is_file()


def test_generate_rejects_unit_feedback(tmp_path):
    dataset = {**DATASET, "params": {"beta": 1.0}}
    config = _config(tmp_path, dataset=dataset)
    result = _invoke("generate", "--config", config, "--out", tmp_path / "out")
    assert result.exit_code == 2
    assert not (tmp_path / "out" / "Y.csv").exists()


def test_generate_needs_dataset_section(tmp_path):
    result = _invoke("generate", "--config", _config(tmp_path), "--out", tmp_path / "out")
    assert result.exit_code == 2


def test_missing_config_file(tmp_path):
    result = _invoke("generate", "--config", tmp_path / "absent.yaml")
    assert result.exit_code == 2


def test_bad_seed_override(tmp_path):
    config = _config(tmp_path, dataset=DATASET)
    result = _invoke("generate", "--config", config, "--seed-override", "a,b")
    assert result.exit_code == 2


def test_estimate_writes_result(tmp_path):
    data = _generate(tmp_path, tmp_path / "data")
    config = _config(tmp_path, stage1=FAST_NETWORK, stage2=FAST_NETWORK)
    out = tmp_path / "est"
    result = _invoke(
        "estimate", "--config", config, "--dataset", data, "--estimator", "dig2rsi", "--out", out
    )
    assert result.exit_code == 0, result.output
    payload = json.loads((out / "result.json").read_text())
    assert payload["label"] == "DIG2RSI"
    assert payload["true_beta"] == 0.5
    assert payload["abs_bias"] == pytest.approx(abs(payload["pe_hat"] - 0.5))
    assert (out / "per_node_pe.csv").is_file()
    assert "PE =" in result.stdout


def test_estimate_without_truth(tmp_path):
    data = _generate(tmp_path, tmp_path / "data")
    (data / "truth.json").unlink()
    out = tmp_path / "est"
    result = _invoke(
        "estimate", "--config", _config(tmp_path), "--dataset", data, "--estimator", "naive", "--out", out
    )
    assert result.exit_code == 0, result.output
    payload = json.loads((out / "result.json").read_text())
    assert payload["abs_bias"] is None and payload["rel_bias"] is None
    assert "absolute bias" not in result.stdout


def test_estimate_unknown_estimator(tmp_path):
    data = _generate(tmp_path, tmp_path / "data")
    result = _invoke(
        "estimate", "--config", _config(tmp_path), "--dataset", data, "--estimator", "ces",
        "--out", tmp_path / "est",
    )
    assert result.exit_code == 2
    assert not (tmp_path / "est" / "result.json").exists()


def test_estimate_malformed_dataset(tmp_path):
    data = _generate(tmp_path, tmp_path / "data")
    (data / "X.csv").unlink()
    result = _invoke(
        "estimate", "--config", _config(tmp_path), "--dataset", data, "--estimator", "naive",
        "--out", tmp_path / "est",
    )
    assert result.exit_code == 1


def test_benchmark_tables_are_reproducible(tmp_path):
    config = _config(tmp_path, seeds=[0, 1], dataset=DATASET, estimators=["naive", "2sls"])
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        result = _invoke("--threads", "2", "benchmark", "--config", config, "--out", out)
        assert result.exit_code == 0, result.output
        outputs.append(out)
    for file in ("aggregate.csv", "runs.csv", "long.csv"):
        assert (outputs[0] / file).read_bytes() == (outputs[1] / file).read_bytes()
    assert "2SLS" in (outputs[0] / "aggregate.csv").read_text()


def test_benchmark_on_dataset_directory(tmp_path):
    data = _generate(tmp_path, tmp_path / "data")
    config = _config(tmp_path, seeds=[0, 1], dataset_dir=str(data), estimators=["naive"])
    result = _invoke("benchmark", "--config", config, "--out", tmp_path / "out")
    assert result.exit_code == 0, result.output
    assert (tmp_path / "out" / "runs.csv").is_file()


def test_benchmark_rejects_empty_estimators(tmp_path):
    config = _config(tmp_path, dataset=DATASET, estimators=[])
    result = _invoke("benchmark", "--config", config, "--out", tmp_path / "out")
    assert result.exit_code == 2


def test_benchmark_rejects_single_seed(tmp_path):
    config = _config(tmp_path, dataset=DATASET, estimators=["naive"])
    result = _invoke("benchmark", "--config", config, "--out", tmp_path / "out", "--seed-override", "4")
    assert result.exit_code == 2


def test_confounder_sweep(tmp_path):
    config = _config(
        tmp_path,
        seeds=[0, 1],
        dataset=DATASET,
        sweep={"confounder_strengths": [0.0, 1.0], "estimators": ["naive"]},
    )
    out = tmp_path / "sweep"
    result = _invoke("sweep", "--config", config, "--kind", "confounder", "--out", out)
    assert result.exit_code == 0, result.output
    echo = json.loads((out / "run_config.json").read_text())
    assert echo["kind"] == "confounder"
    assert len((out / "aggregate.csv").read_text().strip().splitlines()) == 3


def test_sweep_rejects_unknown_kind(tmp_path):
    config = _config(tmp_path, seeds=[0, 1], dataset=DATASET)
    result = _invoke("sweep", "--config", config, "--kind", "bogus")
    assert result.exit_code == 2


def test_invalid_log_level(tmp_path):
    result = _invoke("--log-level", "loud", "generate", "--config", _config(tmp_path, dataset=DATASET))
    assert result.exit_code == 2


def test_invalid_environment_setting_is_a_usage_error(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("PEERFX_THREADS", "0")
    result = _invoke("generate", "--config", _config(tmp_path, dataset=DATASET))
    assert result.exit_code == 2
    assert "Invalid configuration" in result.output
    assert "Traceback" not in result.output
