"""Monte Carlo and exact-arithmetic toolkit for weighted ergodic averages along random times.

The random times are the integers selected by independent ``X_n`` with
``P(X_n = 1) = n**-alpha``; weights are ``b(t) = e(t**c)`` drawn from finite
nets.  See the module docstrings for the individual pieces.
"""

from .errors import (ConfigError, DomainError, EmptyDomainError, ErgolabError, HorizonError,
                     NetBudgetError, ParameterError, PrecisionError, RangeError, ResourceError)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DomainError", "EmptyDomainError", "ErgolabError", "HorizonError",
    "NetBudgetError", "ParameterError", "PrecisionError", "RangeError", "ResourceError",
    "__version__",
]
