"""Exception hierarchy shared by every module."""


class QRLabError(Exception):
    """Base class for all errors raised by qrlab."""


class DomainError(QRLabError, ValueError):
    """A point lies outside the domain where an operation is defined."""


class ParameterError(QRLabError, ValueError):
    """An argument is out of its admissible range."""


class RangeError(QRLabError, ValueError):
    """A requested radius or scale is too large for the space."""


class NumericError(QRLabError, ArithmeticError):
    """A numerical evaluation failed (non-finite values, stencil failure)."""


class ConfigError(QRLabError):
    """An experiment configuration failed validation."""
