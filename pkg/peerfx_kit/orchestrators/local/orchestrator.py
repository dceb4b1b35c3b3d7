import asyncio
import logging
from collections.abc import Callable, Sequence
from typing import Generic, TypeVar

from pydantic import BaseModel, Field

from peerfx_kit.datamodel.task import BenchmarkCell, CellTask
from peerfx_kit.datamodel.task_meta import CellStatus
from peerfx_kit.orchestrators.errors import CellFailedError
from peerfx_kit.orchestrators.local.worker import AsyncLocalWorker

_log = logging.getLogger(__name__)

ResultT = TypeVar("ResultT")


class LocalOrchestratorConfig(BaseModel):
    num_workers: int = Field(default=1, ge=1)


class LocalOrchestrator(Generic[ResultT]):
    """Runs benchmark cells on a pool of asyncio workers backed by threads."""

    def __init__(
        self,
        config: LocalOrchestratorConfig,
        runner: Callable[[BenchmarkCell], ResultT],
    ):
        self.config = config
        self.runner = runner
        self.task_queue: asyncio.Queue[str] = asyncio.Queue()
        self.tasks: dict[str, CellTask] = {}
        self._cell_results: dict[str, ResultT] = {}
        self._cell_errors: dict[str, BaseException] = {}

    async def enqueue(self, cell: BenchmarkCell) -> CellTask:
        if cell.cell_id in self.tasks:
            raise ValueError(f"Cell {cell.cell_id} is already queued")
        task = CellTask(cell=cell)
        self.tasks[cell.cell_id] = task
        await self.task_queue.put(cell.cell_id)
        return task

    async def queue_size(self) -> int:
        return self.task_queue.qsize()

    async def process_queue(self):
        # Workers return once the queue is drained
        workers = []
        for i in range(min(self.config.num_workers, max(1, self.task_queue.qsize()))):
            _log.debug(f"Starting worker {i}")
            w = AsyncLocalWorker(i, self)
            workers.append(asyncio.create_task(w.loop()))

        await asyncio.gather(*workers)
        _log.debug("All workers completed.")

    async def run_all(self, cells: Sequence[BenchmarkCell]) -> list[ResultT]:
        """Run ``cells`` and return their results in declared order.

        Raises :class:`CellFailedError` for the first failing cell in declared
        order, chained from the original exception.
        """
        for cell in cells:
            await self.enqueue(cell)
        await self.process_queue()

        results = []
        for cell in cells:
            task = self.tasks[cell.cell_id]
            if task.status != CellStatus.SUCCESS:
                cause = self._cell_errors.get(cell.cell_id)
                raise CellFailedError(
                    f"{cell.description} failed",
                    estimator=cell.estimator,
                    seed=cell.seed,
                    sweep_value=cell.sweep_value,
                ) from cause
            results.append(self._cell_results[cell.cell_id])
        return results


def run_cells(
    cells: Sequence[BenchmarkCell],
    runner: Callable[[BenchmarkCell], ResultT],
    num_workers: int = 1,
) -> list[ResultT]:
    orchestrator = LocalOrchestrator(
        LocalOrchestratorConfig(num_workers=num_workers), runner
    )
    return asyncio.run(orchestrator.run_all(cells))
