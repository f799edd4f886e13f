"""Exception types shared across the package."""


class LambdaCoalError(Exception):
    """Base class for all package errors."""


class NonIntegrable(LambdaCoalError, ValueError):
    """An integral against the measure diverges."""


class DomainError(LambdaCoalError, ValueError):
    """An index or parameter is outside its admissible range."""


class MeasureSpecError(LambdaCoalError, ValueError):
    """A measure description (JSON or preset string) is malformed."""


class NotDominated(LambdaCoalError, ValueError):
    """Dominance ``m1 <= m2`` between two measures could not be certified."""


class SizeMismatch(LambdaCoalError, ValueError):
    """Two partitions are over different ground sets."""


class BadIndices(LambdaCoalError, ValueError):
    """Block indices passed to a merge are invalid."""


class PreconditionViolated(LambdaCoalError, ValueError):
    """An operation was called outside its documented precondition."""


class IncompletePath(LambdaCoalError, ValueError):
    """A path stopped before reaching a single block."""


class DegenerateRate(LambdaCoalError, ValueError):
    """A total merger rate needed to be positive but is zero."""


class Degenerate(LambdaCoalError, ValueError):
    """A normalising functional vanishes where a positive value is required."""


class EmptySample(LambdaCoalError, ValueError):
    """A statistical test was given no data."""
