class DatasetFormatError(ValueError):
    """A dataset directory is missing files or holds malformed tables."""

    def __init__(self, message: str, *, path: str | None = None):
        super().__init__(message if path is None else f"{path}: {message}")
        self.path = path
