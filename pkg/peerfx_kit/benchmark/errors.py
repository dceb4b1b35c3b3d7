class BenchmarkConfigError(ValueError):
    """A repetition or sweep was requested with an unusable grid or seed list."""
