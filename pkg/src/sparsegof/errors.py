"""Exception types shared across the package."""


class DegenerateCountsError(ValueError):
    """Counts with n = 0 (or a single cell) cannot feed a test statistic."""


class UnclassifiedFamilyError(ValueError):
    """Rate trends along the grid do not pin down a family of alternatives."""


class UnsupportedPredictionError(ValueError):
    """No theoretical result covers the requested (test, family, regime)."""


class OpenProblemError(UnsupportedPredictionError):
    """The requested comparison is an unresolved case (λ fixed, δ ≥ n^{-1/6})."""


class InstanceTooLargeError(ValueError):
    """Exact enumeration would visit too many compositions."""


class InsufficientBudgetError(ValueError):
    """Naive Monte Carlo cannot expect enough hits at the given budget."""
