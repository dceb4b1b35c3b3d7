class EstimationError(RuntimeError):
    """An estimator could not produce a peer-effect estimate."""


class CollinearityError(EstimationError):
    """The normal equations are singular; retry with a ridge penalty."""


class WeakInstrumentError(EstimationError):
    """The instruments carry no variation beyond the included controls."""


class UnknownEstimatorError(ValueError):
    """The requested estimator name is not registered."""


class WeakInstrumentWarning(UserWarning):
    """The stage-1 partial R² of the instruments is below the warning threshold."""
