"""Error types shared across the package."""


class IdecycleError(Exception):
    """Base class for package errors."""


class EnclosureError(IdecycleError, ArithmeticError):
    """An interval operation could not produce a valid enclosure."""


class DomainError(IdecycleError, ValueError):
    """An argument is outside the domain where an operation is defined."""


class ModelDomainError(DomainError):
    """The growth model has no admissible 2-cycle for the given parameters."""


class UnsupportedRigorError(IdecycleError, TypeError):
    """Certified (interval) evaluation was requested on a float-only path."""


class SolverError(IdecycleError, RuntimeError):
    """A Newton or shooting solve failed to converge.

    ``history`` holds the residual norms seen before giving up.
    """

    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = list(history or [])


class SeedError(SolverError):
    """No usable numerical candidate could be produced by shooting."""


class ProofError(IdecycleError, RuntimeError):
    """The radii polynomial could not be shown negative anywhere.

    ``stage`` names the failing bound or check.
    """

    def __init__(self, msg, stage=None, bounds=None):
        super().__init__(msg)
        self.stage = stage
        self.bounds = bounds


class InconclusiveError(IdecycleError, RuntimeError):
    """A numerical diagnostic (winding number, quadrature) could not be resolved."""


class StaleArtifactError(IdecycleError, RuntimeError):
    """An upstream artifact is missing or its hash does not match."""
