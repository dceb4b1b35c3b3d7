"""Shared test fixtures for peerfx-kit tests."""

import logging

import numpy as np
import pytest

from peerfx_kit.datamodel.run_config import EstimationSettings
from peerfx_kit.datamodel.sem_params import SemParams
from peerfx_kit.datamodel.specs import DatasetSpec, GraphModel, GraphSpec
from peerfx_kit.datamodel.train_config import Stage2Config, TrainConfig
from peerfx_kit.graph import from_edge_list
from peerfx_kit.simulate import dataset_from_spec


def pytest_configure(config):
    """Configure logging for tests."""
    logging.getLogger("peerfx_kit").setLevel(logging.INFO)


@pytest.fixture
def path_graph():
    return from_edge_list([(0, 1), (1, 2)], 3)


@pytest.fixture
def triangle_graph():
    return from_edge_list([(0, 1), (1, 2), (0, 2)], 3)


@pytest.fixture
def small_spec() -> DatasetSpec:
    return DatasetSpec(
        graph=GraphSpec(model=GraphModel.ERDOS_RENYI, n=120, p=0.06),
        d=2,
        params=SemParams(beta=0.5, lambda_u=1.0),
    )


@pytest.fixture
def small_dataset(small_spec):
    return dataset_from_spec(small_spec, seed=3)


@pytest.fixture
def fast_cfg() -> TrainConfig:
    return TrainConfig(
        lr=1e-2, epochs=3, batch_size=32, hidden=(8, 8), batchnorm=False, dropout=0.0
    )


@pytest.fixture
def fast_settings(fast_cfg) -> EstimationSettings:
    return EstimationSettings(
        stage1=fast_cfg.model_copy(update={"batchnorm": True, "dropout": 0.1}),
        stage2=fast_cfg,
        discriminator=TrainConfig(lr=1e-2, epochs=3, batch_size=32),
        stage2_options=Stage2Config(lambda_a=0.01),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
