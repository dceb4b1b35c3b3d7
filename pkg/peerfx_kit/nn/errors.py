class ModelError(ValueError):
    """A network was called with the wrong shapes, in the wrong mode, or with a stale cache."""


class TrainingDivergedError(RuntimeError):
    """The training loss became non-finite."""
