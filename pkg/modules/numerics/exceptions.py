"""Errors raised by numerical routines."""


class NumericalError(ArithmeticError):
    """A computation could not produce a finite, trustworthy result."""


class ConvergenceError(NumericalError):
    """An iterative decomposition hit its iteration cap."""


class RankDeficiencyError(NumericalError):
    """A factorization met a (numerically) singular input."""


class ShapeError(ValueError):
    """Operands have incompatible or invalid shapes."""


class MatrixFormatError(ValueError):
    """An SBMX file is malformed or has an unsupported header."""
