"""
Exception hierarchy for ParRep
"""
from typing import Optional


class ParRepError(Exception):
    """Base class for every error raised by this package"""


class DomainError(ParRepError, ValueError):
    """A state is not part of the kernel's state space"""


class UnsupportedOperationError(ParRepError, TypeError):
    """An exact-matrix operation was requested on a non-finite kernel"""


class ConfigurationError(ParRepError, ValueError):
    """Invalid configuration, kernel, or metastable collection"""


class OverlapError(ConfigurationError):
    """Two metastable sets share a state"""


class AbsorbingSetError(ConfigurationError):
    """A metastable set can never be left"""


class PreconditionError(ParRepError, ValueError):
    """An operation was called outside its precondition"""


class NumericError(ParRepError, RuntimeError):
    """An iterative solver failed to converge"""

    def __init__(self, message: str, residual: Optional[float] = None, iterations: Optional[int] = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DegenerateSetError(NumericError):
    """Conditioning on survival in a set has zero mass"""


class RejectionBudgetError(ParRepError, RuntimeError):
    """Rejection dephasing exhausted its restart budget"""


class ExtinctionError(ParRepError, RuntimeError):
    """Every Fleming-Viot walker left the set in the same step"""


class DecorrelationTimeout(ParRepError, RuntimeError):
    """The decorrelation step exceeded its step cap"""


class UndefinedRatioError(ParRepError, ZeroDivisionError):
    """Speedup requested with zero wall-clock time"""


class CapacityError(ParRepError, MemoryError):
    """An exact oracle would exceed its memory budget"""


class OracleError(ParRepError, RuntimeError):
    """Oracle values are missing or a comparison failed"""
