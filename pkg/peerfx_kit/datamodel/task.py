from typing import Optional

from pydantic import BaseModel, ConfigDict

from peerfx_kit.datamodel.dataset import Dataset
from peerfx_kit.datamodel.run_config import EstimationSettings
from peerfx_kit.datamodel.specs import DatasetSpec, EstimatorName
from peerfx_kit.datamodel.task_meta import CellStatus, SweepKind


class BenchmarkCell(BaseModel):
    """One (estimator, sweep value, seed) fit.

    Simulated cells regenerate their dataset from ``dataset_spec`` and ``seed``;
    cells on ingested data carry the dataset itself.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    cell_id: str
    estimator: EstimatorName
    seed: int
    settings: EstimationSettings
    dataset_spec: Optional[DatasetSpec] = None
    dataset: Optional[Dataset] = None
    sweep_kind: Optional[SweepKind] = None
    sweep_value: Optional[float] = None

    @property
    def description(self) -> str:
        where = ""
        if self.sweep_kind is not None:
            where = f", {self.sweep_kind.value}={self.sweep_value}"
        return f"{self.estimator.label} (seed={self.seed}{where})"


class CellTask(BaseModel):
    cell: BenchmarkCell
    status: CellStatus = CellStatus.PENDING
    error_message: Optional[str] = None

    def set_status(self, status: CellStatus) -> None:
        self.status = status

    def is_completed(self) -> bool:
        return self.status in (CellStatus.SUCCESS, CellStatus.FAILURE)
