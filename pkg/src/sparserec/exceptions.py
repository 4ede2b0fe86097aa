"""Exception hierarchy shared by every sparserec module."""


class SparseRecError(Exception):
    """Base class for errors raised by sparserec."""


class ParameterError(SparseRecError, ValueError):
    """An argument violates a precondition (shape, range, cardinality)."""


class DomainError(ParameterError):
    """A mathematical function was evaluated outside its domain."""


class InfeasibleParametersError(DomainError):
    """A threshold formula has a non-positive denominator.

    ``term`` names the offending expression so callers can report it.
    """

    def __init__(self, message, term=None):
        super().__init__(message)
        self.term = term


class UsageError(SparseRecError, RuntimeError):
    """An operation was applied to an object it does not support."""


class EnumerationBudgetError(SparseRecError, RuntimeError):
    """Exhaustive search would exceed the configured candidate budget."""


class UnreliableEstimateWarning(RuntimeWarning):
    """A Monte Carlo estimate discarded too many infinite draws."""
