"""Exception hierarchy shared by all modules."""


class SubspacePerturbError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(SubspacePerturbError, ValueError):
    """Raised when array shapes are empty or incompatible."""


class NotSymmetricError(SubspacePerturbError, ValueError):
    """Raised when a matrix required to be symmetric is not."""


class DegenerateSplitError(SubspacePerturbError, ValueError):
    """Raised when the requested spectral split has no strict eigengap."""


class OrderingError(SubspacePerturbError, ValueError):
    """Raised when two spectra are required to be ordered but are not."""


class SingularOperatorError(SubspacePerturbError, ArithmeticError):
    """Raised when a Sylvester operator is (numerically) singular."""


class ConvergenceError(SubspacePerturbError, RuntimeError):
    """Raised when an iteration fails to reach its tolerance.

    Attributes
    ----------
    residual : float
        Residual norm of the last iterate.
    iters : int
        Number of iterations performed.
    """

    def __init__(self, msg, residual=float("nan"), iters=0):
        super().__init__(msg)
        self.residual = residual
        self.iters = iters


class CertificateError(SubspacePerturbError, RuntimeError):
    """Raised when a convergence certificate is required but invalid."""

    def __init__(self, msg, certificate=None):
        super().__init__(msg)
        self.certificate = certificate


class AssumptionError(SubspacePerturbError, ValueError):
    """Raised when a precondition of a bound is violated."""


class StaleResultError(SubspacePerturbError, ValueError):
    """Raised when a cached result does not belong to the given inputs."""


class ConfigError(SubspacePerturbError, ValueError):
    """Raised for invalid experiment configurations."""


class FormatError(SubspacePerturbError, ValueError):
    """Raised when a matrix file is malformed or has the wrong kind."""
