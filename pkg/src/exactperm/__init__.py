"""Exact p-values for Monte Carlo and permutation tests."""

from .combinatorics import (
    GroupConfig,
    Sidedness,
    SpaceCount,
    count_space,
    rank,
    unrank,
)
from .engine import (
    Dataset,
    PermTestResult,
    Sampling,
    StatisticKind,
    StatisticSpec,
    compute_statistic,
    exhaustive_test,
    sample_with_replacement,
    sample_without_replacement,
)
from .exceptions import (
    BudgetExceeded,
    DegenerateStatistic,
    ExactPermError,
    NotEnoughPermutations,
    ThresholdExceeded,
    UnrankUnavailable,
)
from .pvalues import (
    Method,
    NullSpace,
    PValueReport,
    TestOutcome,
    binomial_cdf,
    p_exact,
    p_exact_integral,
    p_exact_sum,
    p_upper,
    type1_rate,
)

__version__ = "0.1.0"
