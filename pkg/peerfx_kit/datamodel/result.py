from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


def bias_metrics(pe_hat: float, beta: float) -> tuple[float, Optional[float]]:
    """Absolute bias and relative bias in percent; the latter is undefined at β = 0."""
    abs_bias = abs(pe_hat - beta)
    rel_bias = None if beta == 0 else abs_bias / abs(beta) * 100.0
    return abs_bias, rel_bias


class EpochLoss(BaseModel):
    out: float
    disc: Optional[float] = None


class EstimationDiagnostics(BaseModel):
    stage1_r2: Optional[float] = None
    discriminator_r2: Optional[float] = None
    confounder_corr: Optional[float] = None
    first_stage_partial_r2: Optional[float] = None
    weak_instrument: bool = False
    degenerate_instrument: bool = False
    n_instruments: Optional[int] = None
    lambda_a: Optional[float] = None
    use_ig: bool = True
    history: list[EpochLoss] = []
    warnings: list[str] = []


class EstimationResult(BaseModel):
    """Peer-effect estimate of one estimator run."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    estimator: str
    label: str
    pe_hat: float
    per_node_pe: Optional[np.ndarray] = Field(default=None, exclude=True)
    true_beta: Optional[float] = None
    abs_bias: Optional[float] = None
    rel_bias: Optional[float] = None
    seed: Optional[int] = None
    diagnostics: EstimationDiagnostics = EstimationDiagnostics()
    config: dict[str, Any] = {}

    @model_validator(mode="after")
    def _check_consistency(self) -> "EstimationResult":
        if self.per_node_pe is not None:
            mean = float(np.mean(self.per_node_pe))
            if mean != self.pe_hat:
                raise ValueError(
                    f"pe_hat {self.pe_hat!r} is not the mean of per_node_pe ({mean!r})"
                )
        if (self.abs_bias is None) != (self.true_beta is None):
            raise ValueError("Bias metrics must be present exactly when truth is known")
        return self

    @classmethod
    def from_per_node(
        cls,
        estimator: str,
        label: str,
        per_node_pe: np.ndarray,
        true_beta: Optional[float],
        **kwargs: Any,
    ) -> "EstimationResult":
        pe_hat = float(np.mean(per_node_pe))
        abs_bias: Optional[float] = None
        rel_bias: Optional[float] = None
        if true_beta is not None:
            abs_bias, rel_bias = bias_metrics(pe_hat, true_beta)
        return cls(
            estimator=estimator,
            label=label,
            pe_hat=pe_hat,
            per_node_pe=per_node_pe,
            true_beta=true_beta,
            abs_bias=abs_bias,
            rel_bias=rel_bias,
            **kwargs,
        )


class RunRecord(BaseModel):
    """One (estimator, sweep value, seed) cell of a benchmark."""

    estimator: str
    label: str
    sweep_kind: Optional[str] = None
    sweep_value: Optional[float] = None
    seed: int
    dataset_hash: str
    pe_hat: float
    abs_bias: Optional[float] = None
    rel_bias: Optional[float] = None
    stage1_r2: Optional[float] = None
    discriminator_r2: Optional[float] = None
    confounder_corr: Optional[float] = None


class BenchmarkRow(BaseModel):
    estimator: str
    label: str
    sweep_value: Optional[float] = None
    n_seeds: int
    mean_abs_bias: Optional[float] = None
    std_abs_bias: Optional[float] = None
    mean_rel_bias: Optional[float] = None
    std_rel_bias: Optional[float] = None
    mean_pe: float
    std_pe: float


class BenchmarkReport(BaseModel):
    rows: list[BenchmarkRow]
    runs: list[RunRecord]
    n_seeds: int
    sweep_kind: Optional[str] = None
    config: dict[str, Any] = {}
