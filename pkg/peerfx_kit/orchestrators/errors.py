from typing import Optional

from peerfx_kit.datamodel.specs import EstimatorName


class OrchestratorError(Exception):
    pass


class CellNotFoundError(OrchestratorError):
    pass


class CellFailedError(OrchestratorError):
    """A benchmark cell raised; the original exception is the ``__cause__``."""

    def __init__(
        self,
        message: str,
        *,
        estimator: EstimatorName,
        seed: int,
        sweep_value: Optional[float] = None,
    ):
        super().__init__(message)
        self.estimator = estimator
        self.seed = seed
        self.sweep_value = sweep_value
