import logging
import os
import tempfile
from pathlib import Path

from peerfx_kit.connectors.local_path.models import LocalPathTarget
from peerfx_kit.connectors.target_processor import BaseTargetProcessor

_log = logging.getLogger(__name__)


class LocalPathTargetProcessor(BaseTargetProcessor):
    """Writes into a directory; every file is replaced atomically."""

    def __init__(self, target: LocalPathTarget):
        self.target = target

    def _initialize(self) -> None:
        root = self.target.path
        if root.exists() and not root.is_dir():
            raise NotADirectoryError(f"Output path is not a directory: {root}")
        root.mkdir(parents=True, exist_ok=True)

    def _finalize(self) -> None:
        pass

    def upload_object(self, obj: str | bytes, target_filename: str) -> None:
        data = obj.encode("utf-8") if isinstance(obj, str) else bytes(obj)
        destination = self.target.path / target_filename
        destination.parent.mkdir(parents=True, exist_ok=True)

        fd, tmp_name = tempfile.mkstemp(
            prefix=f".{destination.name}.", suffix=".tmp", dir=destination.parent
        )
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
            os.replace(tmp_name, destination)
        except BaseException:
            Path(tmp_name).unlink(missing_ok=True)
            raise
        _log.debug(f"Wrote {len(data)} bytes to {destination}")
