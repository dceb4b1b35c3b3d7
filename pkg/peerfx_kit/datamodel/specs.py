import enum
from pathlib import Path
from typing import Annotated, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from peerfx_kit.datamodel.sem_params import SemParams


class GraphModel(str, enum.Enum):
    ERDOS_RENYI = "erdos_renyi"
    BARABASI_ALBERT = "barabasi_albert"
    FROM_FILE = "from_file"


DEFAULT_RANDOM_N = 1000


class GraphSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: GraphModel = GraphModel.ERDOS_RENYI
    n: Annotated[
        Optional[int],
        Field(
            ge=2,
            description=(
                f"Node count. Random models default to {DEFAULT_RANDOM_N}; "
                "from_file infers it from the largest node id when omitted."
            ),
        ),
    ] = None
    p: Annotated[
        Optional[float],
        Field(gt=0, le=1, description="Edge probability for erdos_renyi."),
    ] = 0.01
    m: Annotated[
        Optional[int], Field(ge=1, description="Attachment count for barabasi_albert.")
    ] = None
    path: Annotated[
        Optional[Path], Field(description="Edge-list file for from_file.")
    ] = None

    @model_validator(mode="after")
    def _check_model_params(self) -> "GraphSpec":
        if self.model != GraphModel.FROM_FILE and self.n is None:
            self.n = DEFAULT_RANDOM_N
        if self.model == GraphModel.ERDOS_RENYI:
            if self.p is None:
                raise ValueError("erdos_renyi needs p")
        elif self.model == GraphModel.BARABASI_ALBERT:
            if self.m is None:
                raise ValueError("barabasi_albert needs m")
            assert self.n is not None
            if self.m >= self.n:
                raise ValueError(f"barabasi_albert needs m < n, got m={self.m}, n={self.n}")
        elif self.path is None:
            raise ValueError("from_file needs a path")
        elif not self.path.exists():
            raise ValueError(f"Edge-list file does not exist: {self.path}")
        return self

    @property
    def param(self) -> float | int | Path:
        if self.model == GraphModel.ERDOS_RENYI:
            assert self.p is not None
            return self.p
        if self.model == GraphModel.BARABASI_ALBERT:
            assert self.m is not None
            return self.m
        assert self.path is not None
        return self.path


class DatasetSpec(BaseModel):
    """Everything needed to regenerate a simulated dataset from a seed."""

    model_config = ConfigDict(extra="forbid")

    graph: GraphSpec = GraphSpec()
    d: Annotated[int, Field(ge=1, description="Feature dimension.")] = 5
    params: SemParams = SemParams()


class InstrumentSource(str, enum.Enum):
    SECOND_ORDER = "second_order"
    FIRST_ORDER_MEAN = "first_order_mean"
    LEAVE_ONE_OUT = "leave_one_out"


class LinearIvSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    instrument_source: InstrumentSource = InstrumentSource.SECOND_ORDER
    control_own: Annotated[
        bool, Field(description="Include the own features X as controls.")
    ] = True
    control_neighbor: Annotated[
        bool, Field(description="Include the neighbour means X_G as controls.")
    ] = True
    ridge: Annotated[
        float, Field(ge=0, description="Ridge added to the normal equations.")
    ] = 0.0


class EstimatorName(str, enum.Enum):
    NAIVE = "naive"
    TSLS = "2sls"
    FN_IV = "fn-iv"
    LOO = "loo"
    DL2SLS = "dl2sls"
    DIG2RSI = "dig2rsi"

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    EstimatorName.NAIVE: "naive",
    EstimatorName.TSLS: "2SLS",
    EstimatorName.FN_IV: "FN-IV",
    EstimatorName.LOO: "LOO",
    EstimatorName.DL2SLS: "DL-2SLS",
    EstimatorName.DIG2RSI: "DIG2RSI",
}
