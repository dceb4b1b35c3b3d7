from peerfx_kit.orchestrators.errors import (
    CellFailedError,
    CellNotFoundError,
    OrchestratorError,
)

__all__ = ["CellFailedError", "CellNotFoundError", "OrchestratorError"]
