import enum
from typing import Annotated, Optional, Union

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Nonlinearity(str, enum.Enum):
    LINEAR = "linear"
    NONLINEAR = "nonlinear"


Coefficient = Union[float, list[float]]


def _as_vector(value: Coefficient, d: int, name: str) -> npt.NDArray[np.float64]:
    if isinstance(value, list):
        if len(value) != d:
            raise ValueError(
                f"{name} has {len(value)} coefficients but features have {d} columns"
            )
        return np.asarray(value, dtype=np.float64)
    return np.full(d, float(value), dtype=np.float64)


class SemParams(BaseModel):
    """Coefficients and noise scales of the simulated structural equation model.

    The outcome of node i solves
    ``Y = β·GY + γ·GX + δ·g(X) + λ·U + ω·GU + leak·G²X·1 + ε⁽²⁾``.
    A scalar ``gamma``/``delta`` is broadcast to every feature column.
    """

    model_config = ConfigDict(extra="forbid")

    beta: Annotated[
        float,
        Field(description="Peer effect. The equilibrium exists only for |beta| < 1."),
    ] = 0.5
    gamma: Annotated[
        Coefficient, Field(description="Loading of the neighbour mean of X.")
    ] = 0.5
    delta: Annotated[Coefficient, Field(description="Loading of the own features.")] = (
        1.0
    )
    lambda_u: Annotated[
        float, Field(description="Loading of the hidden confounder on the outcome.")
    ] = 1.0
    omega: Annotated[
        Optional[float],
        Field(
            description=(
                "Loading of the neighbours' confounders, the direct confounder "
                "channel into peer exposure. Defaults to lambda_u."
            )
        ),
    ] = None
    phi: Annotated[
        Optional[float],
        Field(
            description=(
                "Stage-1 working-model coefficient on X_G2. Recorded for "
                "provenance, not used by the simulator."
            )
        ),
    ] = None
    psi: Annotated[
        Optional[float],
        Field(
            description=(
                "Stage-1 working-model coefficient on X_G. Recorded for "
                "provenance, not used by the simulator."
            )
        ),
    ] = None
    eps_scale: Annotated[
        tuple[float, float],
        Field(
            description=(
                "Standard deviations of the stage-1 and outcome noise. Only the "
                "outcome noise is drawn; stage-1 noise arises from the simulation."
            )
        ),
    ] = (1.0, 0.5)
    confounder_scale: Annotated[
        float, Field(gt=0, description="Standard deviation of the confounder draw.")
    ] = 1.0
    confounder_mixing: Annotated[
        float,
        Field(
            ge=0,
            le=1,
            description="Share of the confounder taken from the neighbour mean.",
        ),
    ] = 0.5
    instrument_leak: Annotated[
        float,
        Field(
            description=(
                "Direct loading of G²X on the outcome. Non-zero values break the "
                "exclusion restriction of second-order instruments."
            )
        ),
    ] = 0.0
    nonlinearity: Nonlinearity = Nonlinearity.LINEAR

    @field_validator("beta")
    @classmethod
    def _check_beta(cls, value: float) -> float:
        if not abs(value) < 1:
            raise ValueError(f"|beta| must be < 1 for the equilibrium to exist, got {value}")
        return value

    @field_validator("eps_scale")
    @classmethod
    def _check_eps_scale(cls, value: tuple[float, float]) -> tuple[float, float]:
        if min(value) <= 0:
            raise ValueError(f"Noise scales must be positive, got {value}")
        return value

    @model_validator(mode="after")
    def _check_finite(self) -> "SemParams":
        scalars = [self.beta, self.lambda_u, self.omega_value, self.instrument_leak]
        for value in (self.gamma, self.delta):
            scalars.extend(value if isinstance(value, list) else [value])
        if not np.all(np.isfinite(scalars)):
            raise ValueError("All structural coefficients must be finite")
        return self

    @property
    def omega_value(self) -> float:
        return self.lambda_u if self.omega is None else self.omega

    def gamma_vector(self, d: int) -> npt.NDArray[np.float64]:
        return _as_vector(self.gamma, d, "gamma")

    def delta_vector(self, d: int) -> npt.NDArray[np.float64]:
        return _as_vector(self.delta, d, "delta")

    def with_confounding(self, strength: float) -> "SemParams":
        """Copy with ``lambda_u`` and ``omega`` both set to ``strength``."""
        return self.model_copy(update={"lambda_u": strength, "omega": strength})
