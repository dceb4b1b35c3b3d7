import logging
from collections.abc import Callable
from typing import Union

from peerfx_kit.datamodel.dataset import Dataset
from peerfx_kit.datamodel.result import EstimationResult
from peerfx_kit.datamodel.run_config import EstimationSettings
from peerfx_kit.datamodel.specs import EstimatorName, InstrumentSource
from peerfx_kit.estimators.dig2rsi import run_dig2rsi
from peerfx_kit.estimators.dl2sls import dl_2sls
from peerfx_kit.estimators.errors import UnknownEstimatorError
from peerfx_kit.estimators.linear import naive_ols, tsls

_log = logging.getLogger(__name__)

EstimatorFn = Callable[[Dataset, EstimationSettings, int], EstimationResult]


def _naive(ds: Dataset, settings: EstimationSettings, seed: int) -> EstimationResult:
    result = naive_ols(ds, use_ig=settings.use_ig)
    result.seed = seed
    return result


def _linear_iv(source: InstrumentSource, **overrides: bool) -> EstimatorFn:
    def run(ds: Dataset, settings: EstimationSettings, seed: int) -> EstimationResult:
        spec = settings.linear.model_copy(
            update={"instrument_source": source, **overrides}
        )
        result = tsls(ds, spec, use_ig=settings.use_ig)
        result.seed = seed
        return result

    return run


def _dl2sls(ds: Dataset, settings: EstimationSettings, seed: int) -> EstimationResult:
    return dl_2sls(
        ds, settings.stage1, settings.stage2, seed=seed, use_ig=settings.use_ig
    )


def _dig2rsi(ds: Dataset, settings: EstimationSettings, seed: int) -> EstimationResult:
    return run_dig2rsi(
        ds,
        settings.stage1,
        settings.stage2,
        seed=seed,
        disc_cfg=settings.discriminator,
        options=settings.stage2_options,
        apply_ig=settings.use_ig,
    )


# FN-IV uses X_G as the excluded instrument, so it cannot also be a control.
_REGISTRY: dict[EstimatorName, EstimatorFn] = {
    EstimatorName.NAIVE: _naive,
    EstimatorName.TSLS: _linear_iv(InstrumentSource.SECOND_ORDER),
    EstimatorName.FN_IV: _linear_iv(
        InstrumentSource.FIRST_ORDER_MEAN, control_neighbor=False
    ),
    EstimatorName.LOO: _linear_iv(InstrumentSource.LEAVE_ONE_OUT),
    EstimatorName.DL2SLS: _dl2sls,
    EstimatorName.DIG2RSI: _dig2rsi,
}


def supported_estimators() -> list[str]:
    return [name.value for name in _REGISTRY]


def parse_estimator(name: Union[str, EstimatorName]) -> EstimatorName:
    if isinstance(name, EstimatorName):
        return name
    try:
        return EstimatorName(name.strip().lower())
    except ValueError:
        raise UnknownEstimatorError(
            f"Unknown estimator {name!r}. Supported estimators: "
            f"{', '.join(supported_estimators())}"
        ) from None


def get_estimator(name: Union[str, EstimatorName]) -> EstimatorFn:
    return _REGISTRY[parse_estimator(name)]


def run_estimator(
    name: Union[str, EstimatorName],
    ds: Dataset,
    settings: EstimationSettings,
    seed: int = 0,
) -> EstimationResult:
    estimator = parse_estimator(name)
    _log.debug(f"Running {estimator.label} with seed {seed}")
    return _REGISTRY[estimator](ds, settings, seed)
