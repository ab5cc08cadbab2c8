"""Numerical toolkit for quasiregular maps, conformal metrics and normal families."""

from .errors import (ConfigError, DomainError, NumericError, ParameterError, QRLabError,
                     RangeError)
from .maps import QRMap, evaluate, orbit, numeric_jacobian
from .metrics import ConformalMetric, Region, distance

__all__ = ["ConfigError", "DomainError", "NumericError", "ParameterError", "QRLabError",
           "RangeError", "QRMap", "evaluate", "orbit", "numeric_jacobian",
           "ConformalMetric", "Region", "distance"]
__version__ = "0.1.0"
