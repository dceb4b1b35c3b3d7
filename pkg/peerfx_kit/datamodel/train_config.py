from typing import Annotated, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

LAMBDA_A_GRID = (0.0, 0.01, 0.02, 0.03, 0.05, 0.08, 0.1)


class TrainConfig(BaseModel):
    """Optimizer and architecture settings for one network.

    Architecture fields left unset fall back to the defaults of the stage that
    consumes the config.
    """

    model_config = ConfigDict(extra="forbid")

    lr: Annotated[float, Field(gt=0, description="Adam learning rate.")] = 1e-3
    epochs: Annotated[int, Field(ge=1, description="Full passes over the data.")] = 100
    batch_size: Annotated[int, Field(ge=1)] = 128
    seed: int = 0
    beta1: Annotated[float, Field(ge=0, lt=1)] = 0.9
    beta2: Annotated[float, Field(ge=0, lt=1)] = 0.999
    eps: Annotated[float, Field(gt=0)] = 1e-8
    weight_decay: Annotated[
        float, Field(ge=0, description="L2 penalty added to weight gradients.")
    ] = 0.0
    hidden: Annotated[
        Optional[tuple[int, ...]],
        Field(description="Hidden layer widths. The last width is the embedding size."),
    ] = None
    batchnorm: Optional[bool] = None
    dropout: Annotated[Optional[float], Field(ge=0, lt=1)] = None


class Stage2Config(BaseModel):
    """Options of the adversarial control-function regression."""

    model_config = ConfigDict(extra="forbid")

    lambda_a: Annotated[
        float, Field(ge=0, description="Weight of the adversarial penalty.")
    ] = 0.01
    alternation: Annotated[
        Literal["batch", "epoch"],
        Field(
            description=(
                "Alternate discriminator and main updates every mini-batch, or "
                "run a full discriminator pass before each main pass."
            )
        ),
    ] = "batch"
    use_discriminator: bool = True
    include_control: Annotated[
        bool,
        Field(
            description=(
                "Feed the stage-1 residual to the outcome model. Disabling it "
                "also disables the discriminator."
            )
        ),
    ] = True
    probe_holdout: Annotated[
        float,
        Field(
            gt=0,
            lt=1,
            description="Fraction of nodes held out when scoring the residual probe.",
        ),
    ] = 0.3
