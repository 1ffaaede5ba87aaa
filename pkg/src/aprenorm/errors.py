class RenormError(Exception):
    """Base class for numerical failures in this package."""


class ConfigurationError(RenormError, ValueError):
    pass


class CompositionError(RenormError):
    """Raised when a series composition leaves the disk of convergence."""


class DegenerateError(RenormError):
    """A denominator (twist, scaling or midpoint) vanished."""


class ConvergenceError(RenormError):
    def __init__(self, message, residual=None, iterate=None):
        super().__init__(message)
        self.residual = residual
        self.iterate = iterate


class DomainEscapeError(RenormError):
    pass


class OutsideDiskWarning(RuntimeWarning):
    pass
