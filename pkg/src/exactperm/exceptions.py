"""Exception types raised across the package."""


class ExactPermError(ValueError):
    """Base class for validation and domain errors."""


class ThresholdExceeded(ExactPermError):
    """The permutation space is too large for the exact summation."""


class UnrankUnavailable(ExactPermError):
    """Exact ranking needs a space count that did not overflow."""


class NotEnoughPermutations(ExactPermError):
    """More distinct permutations were requested than exist."""


class BudgetExceeded(ExactPermError):
    """Exhaustive enumeration would exceed the configured budget."""


class DegenerateStatistic(ExactPermError):
    """The test statistic is undefined for the observed data."""
