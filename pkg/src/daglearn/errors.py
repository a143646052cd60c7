"""Exception types shared across the package."""


class DagLearnError(Exception):
    pass


class DimensionError(DagLearnError, ValueError):
    """Array shapes are incompatible with the requested operation."""


class DomainError(DagLearnError, ValueError):
    """Input contains values outside the operation's domain (e.g. NaN/inf)."""


class NotPSDError(DagLearnError, ValueError):
    """Cholesky factorization failed even after jitter escalation."""


class DivergedError(DagLearnError, RuntimeError):
    """The objective became non-finite and could not be recovered.

    ``trace`` carries whatever outer-iteration history was collected before
    the failure.
    """

    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = list(trace) if trace is not None else []


class InputError(DagLearnError, ValueError):
    """Bad user-supplied input (files, configs, starting points)."""
