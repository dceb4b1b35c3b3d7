import json
from abc import ABC, abstractmethod
from contextlib import AbstractContextManager
from typing import Any

import pandas as pd


class BaseTargetProcessor(AbstractContextManager, ABC):
    """Destination for run artifacts: CSV tables, JSON echoes and edge lists."""

    def __enter__(self):
        self._initialize()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self._finalize()

    @abstractmethod
    def _initialize(self) -> None: ...

    @abstractmethod
    def _finalize(self) -> None: ...

    @abstractmethod
    def upload_object(self, obj: str | bytes, target_filename: str) -> None:
        """Store ``obj`` under ``target_filename``, replacing any previous content."""

    def write_frame(
        self, frame: pd.DataFrame, target_filename: str, float_format: str = "%.17g"
    ) -> None:
        self.upload_object(
            frame.to_csv(index=False, float_format=float_format, lineterminator="\n"),
            target_filename,
        )

    def write_json(self, payload: Any, target_filename: str) -> None:
        # sorted keys keep run_config.json byte-stable across runs
        self.upload_object(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", target_filename
        )
