class FitError(RuntimeError):
    """A fit could not produce a meaningful result."""
