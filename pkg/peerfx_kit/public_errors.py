from __future__ import annotations

import enum

import yaml
from numpy.linalg import LinAlgError
from pydantic import BaseModel, ValidationError

from peerfx_kit.benchmark.errors import BenchmarkConfigError
from peerfx_kit.connectors.errors import DatasetFormatError
from peerfx_kit.estimators.errors import (
    CollinearityError,
    UnknownEstimatorError,
    WeakInstrumentError,
)
from peerfx_kit.graph import GraphError
from peerfx_kit.nn.errors import TrainingDivergedError
from peerfx_kit.orchestrators.errors import CellFailedError
from peerfx_kit.simulate.errors import SimulationError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

INTERNAL_ERROR_MESSAGE = "Internal processing error."

_CONFIGURATION_ERRORS = (
    ValidationError,
    UnknownEstimatorError,
    BenchmarkConfigError,
    yaml.YAMLError,
)
_DATA_ERRORS = (GraphError, DatasetFormatError, FileNotFoundError)
_NUMERICAL_ERRORS = (
    SimulationError,
    TrainingDivergedError,
    CollinearityError,
    WeakInstrumentError,
    LinAlgError,
    FloatingPointError,
)


class FailureCategory(str, enum.Enum):
    CONFIGURATION = "configuration"
    DATA = "data"
    NUMERICAL = "numerical"
    INTERNAL = "internal"


class PublicFailureInfo(BaseModel):
    category: FailureCategory
    message: str
    exception_type: str
    exit_code: int


def _exception_text(exc: BaseException) -> str:
    detail = str(exc)
    return detail or exc.__class__.__name__


def _unwrap_failure_exception(exc: BaseException) -> BaseException:
    current = exc
    seen: set[int] = set()

    while True:
        obj_id = id(current)
        if obj_id in seen:
            return current
        seen.add(obj_id)

        if isinstance(
            current, _CONFIGURATION_ERRORS + _DATA_ERRORS + _NUMERICAL_ERRORS
        ):
            return current

        cause = current.__cause__
        if isinstance(cause, BaseException):
            current = cause
            continue

        return current


def _raised_in_cell(exc: BaseException) -> bool:
    current: BaseException | None = exc
    seen: set[int] = set()
    while current is not None and id(current) not in seen:
        if isinstance(current, CellFailedError):
            return True
        seen.add(id(current))
        current = current.__cause__
    return False


def classify_failure(exc: BaseException) -> PublicFailureInfo:
    root_exc = _unwrap_failure_exception(exc)
    exception_text = _exception_text(root_exc)

    if isinstance(root_exc, ValidationError) and _raised_in_cell(exc):
        # configs are validated before any cell runs; this is a data problem
        category = FailureCategory.DATA
    elif isinstance(root_exc, _CONFIGURATION_ERRORS):
        category = FailureCategory.CONFIGURATION
        if isinstance(root_exc, ValidationError):
            exception_text = f"Invalid configuration: {root_exc}"
    elif isinstance(root_exc, _DATA_ERRORS):
        category = FailureCategory.DATA
    elif isinstance(root_exc, _NUMERICAL_ERRORS):
        category = FailureCategory.NUMERICAL
    else:
        category = FailureCategory.INTERNAL
        exception_text = INTERNAL_ERROR_MESSAGE

    # Failures inside a benchmark cell keep the identifying outer message.
    if root_exc is not exc and category != FailureCategory.CONFIGURATION:
        exception_text = f"{_exception_text(exc)}: {exception_text}"

    return PublicFailureInfo(
        category=category,
        message=exception_text,
        exception_type=root_exc.__class__.__name__,
        exit_code=EXIT_USAGE
        if category == FailureCategory.CONFIGURATION
        else EXIT_FAILURE,
    )


def exit_code_for(exc: BaseException) -> int:
    return classify_failure(exc).exit_code


def build_public_error_message(exc: BaseException, debug_enabled: bool = False) -> str:
    failure = classify_failure(exc)
    if debug_enabled:
        return f"{failure.exception_type}: {_exception_text(exc)}"
    return failure.message
