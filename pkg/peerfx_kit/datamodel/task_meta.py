import enum


class CellStatus(str, enum.Enum):
    SUCCESS = "success"
    PENDING = "pending"
    STARTED = "started"
    FAILURE = "failure"


class SweepKind(str, enum.Enum):
    LAMBDA_A = "lambda_a"
    CONFOUNDER = "confounder"
    IG_ABLATION = "ig_ablation"


__all__ = ["CellStatus", "SweepKind"]
