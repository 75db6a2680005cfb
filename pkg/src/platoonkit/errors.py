"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid user-supplied parameter (bad n/k, malformed reference set, ...)."""


class NumericalError(RuntimeError):
    """A numerical routine failed (eigensolver non-convergence, singular solve)."""
