import asyncio
import logging
import time
from typing import TYPE_CHECKING

from peerfx_kit.datamodel.task_meta import CellStatus
from peerfx_kit.orchestrators.errors import CellNotFoundError
from peerfx_kit.public_errors import build_public_error_message

if TYPE_CHECKING:
    from peerfx_kit.orchestrators.local.orchestrator import LocalOrchestrator

_log = logging.getLogger(__name__)


class AsyncLocalWorker:
    def __init__(self, worker_id: int, orchestrator: "LocalOrchestrator"):
        self.worker_id = worker_id
        self.orchestrator = orchestrator

    async def loop(self):
        _log.debug(f"Starting loop for worker {self.worker_id}")
        while True:
            try:
                cell_id: str = self.orchestrator.task_queue.get_nowait()
            except asyncio.QueueEmpty:
                _log.debug(f"Worker {self.worker_id} found the queue empty")
                return
            if cell_id not in self.orchestrator.tasks:
                raise CellNotFoundError(f"Cell {cell_id} not found.")
            task = self.orchestrator.tasks[cell_id]

            try:
                task.set_status(CellStatus.STARTED)
                _log.info(
                    f"Worker {self.worker_id} processing {task.cell.description}"
                )
                start = time.monotonic()

                # Run in a thread to avoid blocking the event loop.
                result = await asyncio.to_thread(self.orchestrator.runner, task.cell)
                self.orchestrator._cell_results[cell_id] = result

                task.set_status(CellStatus.SUCCESS)
                _log.info(
                    f"Worker {self.worker_id} completed {task.cell.description} "
                    f"in {time.monotonic() - start:.2f} seconds; "
                    f"{await self.orchestrator.queue_size()} cell(s) still queued"
                )

            except Exception as e:
                _log.error(
                    f"Worker {self.worker_id} failed to process "
                    f"{task.cell.description}: {e}"
                )
                task.set_status(CellStatus.FAILURE)
                task.error_message = build_public_error_message(e)
                self.orchestrator._cell_errors[cell_id] = e

            finally:
                self.orchestrator.task_queue.task_done()
                _log.debug(f"Worker {self.worker_id} completely done with {cell_id}")
