from abc import ABC, abstractmethod
from contextlib import AbstractContextManager
from typing import Generic, TypeVar

from peerfx_kit.datamodel.dataset import Dataset

SourceT = TypeVar("SourceT")


class BaseSourceProcessor(Generic[SourceT], AbstractContextManager, ABC):
    """Opens a dataset location and materializes one :class:`Dataset` from it.

    Reading is only allowed inside the ``with`` block, after ``_initialize``
    has validated the location.
    """

    def __init__(self, source: SourceT):
        self.source = source
        self._open = False

    def __enter__(self):
        self._initialize()
        self._open = True
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self._open = False
        self._finalize()

    @abstractmethod
    def _initialize(self) -> None: ...

    @abstractmethod
    def _finalize(self) -> None: ...

    @abstractmethod
    def _read_dataset(self) -> Dataset: ...

    def read_dataset(self) -> Dataset:
        if not self._open:
            raise RuntimeError(
                f"{type(self).__name__} is not initialized; open it with 'with' first"
            )
        return self._read_dataset()
