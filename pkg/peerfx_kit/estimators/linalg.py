import logging
import warnings

import numpy as np
import numpy.typing as npt
from scipy import linalg

from peerfx_kit.estimators.errors import CollinearityError

_log = logging.getLogger(__name__)

Array = npt.NDArray[np.float64]

# Smallest admissible squared ratio of Cholesky pivots before the factorization
# is treated as numerically singular.
_PIVOT_RATIO = 1e-13


def least_squares(design: npt.ArrayLike, target: npt.ArrayLike, ridge: float = 0.0) -> Array:
    """Solve ``(DᵀD + ridge·I)·c = Dᵀy``.

    Cholesky is tried first; an ill-conditioned or indefinite factorization
    falls back to a symmetric solve. Raises :class:`CollinearityError` when
    both fail.
    """
    D = np.asarray(design, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if D.ndim != 2 or y.shape != (D.shape[0],):
        raise ValueError(f"Design {D.shape} and target {y.shape} are not row-aligned")
    if D.shape[0] < D.shape[1]:
        raise CollinearityError(
            f"Design has {D.shape[0]} rows but {D.shape[1]} columns"
        )
    if ridge < 0:
        raise ValueError(f"Ridge must be non-negative, got {ridge}")
    if not (np.all(np.isfinite(D)) and np.all(np.isfinite(y))):
        raise ValueError("Design and target must be finite")

    A = D.T @ D
    if ridge:
        A = A + ridge * np.eye(A.shape[0])
    b = D.T @ y

    try:
        factor, lower = linalg.cho_factor(A, check_finite=False)
        pivots = np.diag(factor) ** 2
        if pivots.min() > _PIVOT_RATIO * pivots.max():
            return linalg.cho_solve((factor, lower), b, check_finite=False)
    except linalg.LinAlgError:
        pass

    _log.debug("Cholesky rejected the normal matrix, falling back to a symmetric solve")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", linalg.LinAlgWarning)
            return linalg.solve(A, b, assume_a="sym", check_finite=False)
    except (linalg.LinAlgError, linalg.LinAlgWarning) as exc:
        raise CollinearityError(
            f"Normal equations are singular (ridge={ridge}); the design is collinear"
        ) from exc


def with_intercept(*blocks: npt.ArrayLike) -> Array:
    """Column-stack ``blocks`` (vectors or matrices) and append a constant column."""
    columns = []
    n = None
    for block in blocks:
        arr = np.asarray(block, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        n = arr.shape[0]
        columns.append(arr)
    if n is None:
        raise ValueError("At least one block is required")
    columns.append(np.ones((n, 1)))
    return np.hstack(columns)


def residual_sum_of_squares(design: Array, target: Array, ridge: float = 0.0) -> float:
    coef = least_squares(design, target, ridge)
    resid = target - design @ coef
    return float(resid @ resid)
