from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from peerfx_kit.datamodel.sem_params import SemParams
from peerfx_kit.graph import SparseGraph, aggregate

_YG_TOLERANCE = 1e-10


class Dataset(BaseModel):
    """Network data for one estimation problem.

    ``X``, ``X_G`` and ``X_G2`` are ``(n, d)`` matrices; ``Y``, ``Y_G``, ``U`` and
    ``eps`` are length-``n`` vectors. ``U``, ``eps`` and ``truth`` are only
    known for simulated data.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    graph: SparseGraph
    X: np.ndarray
    Y: np.ndarray
    Y_G: np.ndarray
    X_G: np.ndarray
    X_G2: np.ndarray
    U: Optional[np.ndarray] = None
    eps: Optional[np.ndarray] = None
    truth: Optional[SemParams] = None
    seed: Optional[int] = None
    ig_order: int = Field(
        default=0, ge=0, description="How many times (I − G) has been applied."
    )

    @model_validator(mode="after")
    def _check_shapes(self) -> "Dataset":
        n = self.graph.n
        if self.X.ndim != 2:
            raise ValueError(f"X must be a matrix, got {self.X.ndim} dims")
        for name in ("X", "X_G", "X_G2"):
            value = getattr(self, name)
            if value.shape != self.X.shape or value.shape[0] != n:
                raise ValueError(
                    f"{name} has shape {value.shape}, expected ({n}, {self.X.shape[1]})"
                )
        for name in ("Y", "Y_G", "U", "eps"):
            value = getattr(self, name)
            if value is not None and value.shape != (n,):
                raise ValueError(f"{name} has shape {value.shape}, expected ({n},)")
        for name in ("X", "Y"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")

        scale = max(1.0, float(np.max(np.abs(self.Y), initial=0.0)))
        gap = np.max(np.abs(self.Y_G - aggregate(self.graph, self.Y)), initial=0.0)
        if gap > _YG_TOLERANCE * scale:
            raise ValueError(f"Y_G deviates from G·Y by {gap:.3e}")
        return self

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def d(self) -> int:
        return int(self.X.shape[1])

    @property
    def true_beta(self) -> Optional[float]:
        return None if self.truth is None else self.truth.beta
