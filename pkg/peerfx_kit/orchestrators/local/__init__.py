from peerfx_kit.orchestrators.local.orchestrator import (
    LocalOrchestrator,
    LocalOrchestratorConfig,
    run_cells,
)

__all__ = ["LocalOrchestrator", "LocalOrchestratorConfig", "run_cells"]
