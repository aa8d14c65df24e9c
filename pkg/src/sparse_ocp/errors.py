class NumericalError(RuntimeError):
    """A numerical failure: overflow, singular pivot, failed eigen-solve."""
