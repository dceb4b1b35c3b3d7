from pathlib import Path
from typing import Annotated, Any, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator

from peerfx_kit.datamodel.specs import DatasetSpec, EstimatorName, LinearIvSpec
from peerfx_kit.datamodel.train_config import LAMBDA_A_GRID, Stage2Config, TrainConfig

DEFAULT_SEEDS = [0, 1, 2, 3, 4]
DEFAULT_CONFOUNDER_STRENGTHS = [0.0, 0.5, 1.0, 2.0]


def default_stage1() -> TrainConfig:
    return TrainConfig(hidden=(64, 64), batchnorm=True, dropout=0.1)


def default_stage2() -> TrainConfig:
    return TrainConfig(hidden=(64, 64), batchnorm=False, dropout=0.0)


class EstimationSettings(BaseModel):
    """Per-estimator knobs shared by every cell of a run."""

    model_config = ConfigDict(extra="forbid")

    stage1: TrainConfig = Field(default_factory=default_stage1)
    stage2: TrainConfig = Field(default_factory=default_stage2)
    discriminator: TrainConfig = TrainConfig()
    stage2_options: Stage2Config = Stage2Config()
    linear: LinearIvSpec = LinearIvSpec()
    use_ig: Annotated[
        bool, Field(description="Apply the (I − G) transform before every estimator.")
    ] = True


class SweepSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lambda_grid: Annotated[
        list[float], Field(min_length=1, description="Adversarial weights to sweep.")
    ] = list(LAMBDA_A_GRID)
    confounder_strengths: Annotated[
        list[float],
        Field(min_length=1, description="Values of lambda_u = omega to sweep."),
    ] = DEFAULT_CONFOUNDER_STRENGTHS
    estimators: Annotated[list[EstimatorName], Field(min_length=1)] = [
        EstimatorName.NAIVE,
        EstimatorName.TSLS,
        EstimatorName.DIG2RSI,
    ]

    @field_validator("lambda_grid", "confounder_strengths")
    @classmethod
    def _check_non_negative(cls, value: list[float]) -> list[float]:
        negative = [v for v in value if v < 0]
        if negative:
            raise ValueError(f"Sweep values must be non-negative, got {negative}")
        return value


class RunConfig(BaseModel):
    """One experiment, as read from a YAML file. Unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")

    seed: Annotated[int, Field(description="Seed for single runs (generate, estimate).")] = 0
    seeds: Annotated[
        list[int], Field(description="Seeds for repeated runs (benchmark, sweep).")
    ] = DEFAULT_SEEDS
    dataset: Optional[DatasetSpec] = None
    dataset_dir: Annotated[
        Optional[Path],
        Field(description="Directory of an ingested dataset, used instead of simulating."),
    ] = None
    stage1: TrainConfig = Field(default_factory=default_stage1)
    stage2: TrainConfig = Field(default_factory=default_stage2)
    discriminator: TrainConfig = TrainConfig()
    lambda_a: Annotated[
        Optional[float],
        Field(ge=0, description="Shortcut that overrides stage2_options.lambda_a."),
    ] = None
    stage2_options: Stage2Config = Stage2Config()
    linear: LinearIvSpec = LinearIvSpec()
    use_ig: Annotated[
        bool, Field(description="Apply the (I − G) transform before every estimator.")
    ] = True
    estimators: Annotated[list[EstimatorName], Field(min_length=1)] = [
        EstimatorName.NAIVE,
        EstimatorName.TSLS,
        EstimatorName.FN_IV,
        EstimatorName.LOO,
        EstimatorName.DL2SLS,
        EstimatorName.DIG2RSI,
    ]
    sweep: SweepSection = SweepSection()
    output_dir: Optional[Path] = None
    threads: Annotated[Optional[int], Field(ge=1)] = None

    @field_validator("seeds")
    @classmethod
    def _check_unique_seeds(cls, value: list[int]) -> list[int]:
        if len(set(value)) != len(value):
            raise ValueError(f"Seeds must be distinct, got {value}")
        return value

    @field_validator("dataset_dir")
    @classmethod
    def _check_dataset_dir(cls, value: Optional[Path]) -> Optional[Path]:
        if value is not None and not value.is_dir():
            raise ValueError(f"Dataset directory does not exist: {value}")
        return value

    @classmethod
    def from_yaml(cls, path: Path) -> "RunConfig":
        with path.open("r") as f:
            raw_data = yaml.safe_load(f) or {}
        return cls.model_validate(raw_data)

    def estimation_settings(self) -> EstimationSettings:
        options = self.stage2_options
        if self.lambda_a is not None:
            options = options.model_copy(update={"lambda_a": self.lambda_a})
        return EstimationSettings(
            stage1=self.stage1,
            stage2=self.stage2,
            discriminator=self.discriminator,
            stage2_options=options,
            linear=self.linear,
            use_ig=self.use_ig,
        )

    def echo(self) -> dict[str, Any]:
        return self.model_dump(mode="json")
