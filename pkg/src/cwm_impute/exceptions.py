"""Exception hierarchy shared by the library and the command-line front end."""


class CwmImputeError(Exception):
    """Base class for all errors raised by :mod:`cwm_impute`."""

    exit_code = 1


class ValidationError(CwmImputeError, ValueError):
    """Input data, configuration or parameters violate a documented contract."""

    exit_code = 2


class ParameterError(ValidationError):
    """A distribution parameter lies outside its domain."""


class DegenerateDimensionError(ValidationError):
    """An operation needs at least one covariate but got ``d = 0``."""


class NumericalError(CwmImputeError, ArithmeticError):
    """A numerical routine failed (non-SPD matrix, non-finite integrand, ...)."""

    exit_code = 3


class NotSpdError(NumericalError):
    """Cholesky factorisation hit a non-positive pivot.

    Attributes
    ----------
    pivot : int
        Zero-based index of the failing pivot.
    """

    def __init__(self, pivot, message=None):
        self.pivot = int(pivot)
        super().__init__(message or f"matrix is not positive definite (pivot {self.pivot})")


class SingularFitError(NumericalError):
    """Regression design matrix is rank deficient."""


class DegenerateFitError(NumericalError):
    """Every EM restart collapsed onto a degenerate solution."""


class FileError(CwmImputeError):
    """A file could not be read or written."""

    exit_code = 4


class DataIntegrityError(FileError):
    """A bundled data file does not match its recorded checksum."""
