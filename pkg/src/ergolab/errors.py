"""Exception types raised across the package."""


class ErgolabError(Exception):
    """Base class for all package errors."""


class ParameterError(ErgolabError, ValueError):
    """A numeric parameter lies outside its admissible domain."""


class EmptyDomainError(ErgolabError, ValueError):
    pass


class DomainError(ErgolabError, ValueError):
    """An argument is outside the set where the operation is defined."""


class RangeError(ErgolabError, IndexError):
    """Requested index exceeds the data that was generated."""


class HorizonError(ErgolabError, ValueError):
    """A weight net was built for a shorter horizon than requested."""


class ResourceError(ErgolabError, MemoryError):
    """An object would be too large to build or materialize."""

    def __init__(self, message: str, size: int | None = None):
        super().__init__(message)
        self.size = size


class NetBudgetError(ResourceError):
    """Net size exceeds the certified ``C_delta * exp(N**delta)`` budget."""


class PrecisionError(ErgolabError, ArithmeticError):
    pass


class ConfigError(ErgolabError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        super().__init__(message)
        self.field = field
        self.line = line
