"""Peer-effect estimators: DIG2RSI and the comparison baselines."""

from peerfx_kit.estimators.dig2rsi import (
    Stage1Output,
    Stage2Model,
    Stage2Trainer,
    confounder_correlation,
    estimate_pe,
    run_dig2rsi,
    stage1_fit,
    stage2_fit,
    stage2_inputs,
)
from peerfx_kit.estimators.dl2sls import dl_2sls
from peerfx_kit.estimators.errors import (
    CollinearityError,
    EstimationError,
    UnknownEstimatorError,
    WeakInstrumentError,
    WeakInstrumentWarning,
)
from peerfx_kit.estimators.factory import (
    get_estimator,
    parse_estimator,
    run_estimator,
    supported_estimators,
)
from peerfx_kit.estimators.linalg import least_squares, with_intercept
from peerfx_kit.estimators.linear import (
    build_instruments,
    loo_instruments,
    naive_ols,
    tsls,
)

__all__ = [
    "CollinearityError",
    "EstimationError",
    "Stage1Output",
    "Stage2Model",
    "Stage2Trainer",
    "UnknownEstimatorError",
    "WeakInstrumentError",
    "WeakInstrumentWarning",
    "build_instruments",
    "confounder_correlation",
    "dl_2sls",
    "estimate_pe",
    "get_estimator",
    "least_squares",
    "loo_instruments",
    "naive_ols",
    "parse_estimator",
    "run_dig2rsi",
    "run_estimator",
    "stage1_fit",
    "stage2_fit",
    "stage2_inputs",
    "supported_estimators",
    "tsls",
]
