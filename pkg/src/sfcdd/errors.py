"""Exception hierarchy shared by all sfcdd modules."""


class SfcddError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(SfcddError, ValueError):
    pass


class UnsupportedSizeError(SfcddError, ValueError):
    pass


class ConfigurationError(SfcddError, ValueError):
    pass


class ResourceError(SfcddError, MemoryError):
    pass


class InvalidMatrixError(SfcddError, ValueError):
    pass


class NumericalBreakdownError(SfcddError, ArithmeticError):
    pass


class EstimationError(SfcddError, RuntimeError):
    """Eigenvalue estimation did not converge. ``partial`` holds the last Ritz pair."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class RecoveryFailedError(SfcddError, RuntimeError):
    """Some index of a subdomain has no surviving copy anywhere."""

    def __init__(self, message, cycle=None, lost=None):
        super().__init__(message)
        self.cycle = cycle
        self.lost = lost


class ConsistencyError(SfcddError, RuntimeError):
    """A processor-local copy disagrees with the reference state."""
