"""Exact p-values for randomization tests.

Given ``b``, the number of ``m`` random permutations (or Monte Carlo
datasets) whose statistic is at least as extreme as the observed one,
this module computes

* ``p_hat = b / m``, the unbiased but invalid estimate,
* ``p_upper = (b + 1) / (m + 1)``, exact for sampling without
  replacement and conservative otherwise,
* ``p_exact``, the exact p-value when permutations are drawn with
  replacement from a space of ``m_t + 1`` distinct statistic values.

The exact value averages binomial CDFs over the unknown number of
distinct permutation statistics exceeding the observed one::

    p_exact = 1/(m_t+1) * sum_{j=1}^{m_t+1} F(b; m, j/(m_t+1))

For large spaces the sum is replaced by an integral with a continuity
correction, which reduces to ``p_upper`` minus a short integral near 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special, stats

from .combinatorics import OVERFLOW_THRESHOLD, SpaceCount
from .exceptions import ExactPermError, ThresholdExceeded

#: Largest ``m_t + 1`` for which ``p_exact`` uses the exact summation.
EXACT_SUM_LIMIT = 10_000

#: Gauss-Legendre orders; the coarse one serves as the error estimate.
QUADRATURE_NODES = 128
QUADRATURE_CHECK_NODES = 64

#: Reported relative accumulation bound for the compensated exact sum.
EXACT_SUM_RTOL = 1e-10

_TINY = math.ulp(0.0)


class Method(enum.Enum):
    EXACT_SUM = "exact-sum"
    INTEGRAL_APPROX = "integral-approx"
    UPPER_BOUND_LIMIT = "upper-bound-limit"
    # (b+1)/(m+1) is itself exact when permutations are distinct
    DISTINCT_SAMPLE = "distinct-sample"


@dataclass(frozen=True)
class TestOutcome:
    """``b`` exceedances among ``m`` sampled permutations."""

    __test__ = False  # not a pytest class

    b: int
    m: int

    def __post_init__(self):
        b, m = int(self.b), int(self.m)
        if m < 1:
            raise ExactPermError(f"m must be >= 1, got {m}")
        if not 0 <= b <= m:
            raise ExactPermError(f"b must lie in [0, m={m}], got {b}")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "m", m)


@dataclass(frozen=True)
class NullSpace:
    """Number ``m_t`` of distinct statistic values besides the observed one.

    ``m_t=None`` means the space is effectively infinite. Finite counts
    above the float-exact threshold are flagged as overflowed.
    """

    m_t: int | None
    overflowed: bool = False

    def __post_init__(self):
        if self.m_t is None:
            object.__setattr__(self, "overflowed", True)
            return
        m_t = int(self.m_t)
        if m_t < 1:
            raise ExactPermError(f"m_t must be >= 1, got {m_t}")
        object.__setattr__(self, "m_t", m_t)
        if m_t + 1 > OVERFLOW_THRESHOLD:
            object.__setattr__(self, "overflowed", True)

    @classmethod
    def from_count(cls, count: SpaceCount) -> "NullSpace":
        return cls(m_t=count.m_t, overflowed=count.overflowed)

    @property
    def finite(self) -> bool:
        return self.m_t is not None and not self.overflowed


@dataclass(frozen=True)
class PValueReport:
    p_hat: float
    p_upper: float
    p_exact: float
    method: Method
    abs_error_bound: float

    def as_dict(self) -> dict:
        return {
            "p_hat": self.p_hat,
            "p_upper": self.p_upper,
            "p_exact": self.p_exact,
            "method": self.method.value,
            "abs_error_bound": self.abs_error_bound,
        }


def p_upper(outcome: TestOutcome) -> float:
    """Exact Monte Carlo p-value ``(b + 1) / (m + 1)``."""
    return (outcome.b + 1) / (outcome.m + 1)


def binomial_cdf(b: int, m: int, p):
    """Binomial CDF ``F(b; m, p) = P(X <= b)`` for ``X ~ Binomial(m, p)``.

    ``p`` may be an array. Evaluated through the regularized incomplete
    beta function, ``F(b; m, p) = 1 - I_p(b + 1, m - b)``, using the
    complementary form directly so that tiny and near-one probabilities
    keep full relative precision.
    """
    b, m = int(b), int(m)
    if m < 0 or not 0 <= b <= m:
        raise ExactPermError(f"binomial_cdf needs 0 <= b <= m, got b={b}, m={m}")
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr < 0) | (p_arr > 1)) or np.any(np.isnan(p_arr)):
        raise ExactPermError("binomial_cdf needs probabilities in [0, 1]")
    if b == m:
        out = np.ones_like(p_arr)
    else:
        out = special.betaincc(b + 1, m - b, p_arr)
    return float(out) if out.ndim == 0 else out


def _ordered(value: float, upper: float, b: int, m: int) -> float:
    # Rounding may not erase 0 < p_exact, nor p_exact < p_upper when b < m;
    # both hold exactly for the true values.
    value = max(value, _TINY)
    if b < m and value >= upper:
        value = math.nextafter(upper, 0.0)
    return value


def _require_finite(space: NullSpace) -> int:
    if space.m_t is None:
        raise ExactPermError("this computation needs a finite m_t")
    return space.m_t


def p_exact_sum(outcome: TestOutcome, space: NullSpace, *, limit: int = EXACT_SUM_LIMIT) -> float:
    """Exact p-value by direct summation over all ``m_t + 1`` terms.

    Raises
    ------
    ThresholdExceeded
        If ``m_t + 1 > limit``; use :func:`p_exact_integral` instead.
    """
    m_t = _require_finite(space)
    total = m_t + 1
    if total > limit:
        raise ThresholdExceeded(f"m_t + 1 = {total} exceeds the exact-sum limit {limit}")
    p_t = np.arange(1, total + 1, dtype=float) / total
    terms = binomial_cdf(outcome.b, outcome.m, p_t)
    # ascending b_t, compensated accumulation
    value = math.fsum(terms.tolist()) / total
    return _ordered(value, p_upper(outcome), outcome.b, outcome.m)


@lru_cache(maxsize=8)
def _gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def _correction(b: int, m: int, width: float, order: int) -> float:
    # integral of F(b; m, p) over [0, width]
    x, w = _gauss_legendre(order)
    p = 0.5 * width * (x + 1.0)
    return 0.5 * width * float(np.dot(w, binomial_cdf(b, m, p)))


def _integral_parts(outcome: TestOutcome, m_t: int) -> tuple[float, float]:
    width = 0.5 / (m_t + 1)
    fine = _correction(outcome.b, outcome.m, width, QUADRATURE_NODES)
    coarse = _correction(outcome.b, outcome.m, width, QUADRATURE_CHECK_NODES)
    value = _ordered(p_upper(outcome) - fine, p_upper(outcome), outcome.b, outcome.m)
    return value, abs(fine - coarse)


def p_exact_integral(outcome: TestOutcome, space: NullSpace) -> float:
    """Continuity-corrected integral approximation of the exact p-value.

    Equals ``p_upper`` minus the integral of ``F(b; m, p)`` over
    ``[0, 0.5 / (m_t + 1)]``, evaluated by Gauss-Legendre quadrature.
    Works for any finite ``m_t`` and tends to ``p_upper`` as ``m_t`` grows.
    Absolute accuracy is on the scale of ``p_upper``, so tiny results from
    very small spaces are better served by :func:`p_exact_sum`.
    """
    return _integral_parts(outcome, _require_finite(space))[0]


def _slope_variation(b: int, m: int, lo: float, hi: float) -> float:
    # total variation of dF/dp = -m * pmf(b; m-1, p) on [lo, hi];
    # |dF/dp| is unimodal with its mode at b/(m-1)
    if m == 1:
        return 0.0
    mode = b / (m - 1)
    g_lo, g_hi, g_mode = m * stats.binom.pmf(b, m - 1, [lo, hi, mode])
    if lo < mode < hi:
        return float(2 * g_mode - g_lo - g_hi)
    return float(abs(g_lo - g_hi))


def discretization_bound(outcome: TestOutcome, m_t: int) -> float:
    """Bound on |exact sum - continuity-corrected integral|.

    The exact sum is a midpoint rule for the integral over cells of width
    ``h = 1/(m_t+1)`` centred on ``j*h``. Each full cell contributes at
    most ``h**2/8`` times the variation of ``F'`` across it; the final
    half cell at ``p = 1`` is bounded separately.
    """
    b, m = outcome.b, outcome.m
    h = 1.0 / (m_t + 1)
    c = 0.5 * h
    if b == m:
        return c
    inner = h * h / 8.0 * _slope_variation(b, m, c, 1.0 - c)
    last = c * binomial_cdf(b, m, 1.0 - c)
    return inner + last


def p_exact(
    outcome: TestOutcome,
    space: NullSpace,
    *,
    method: Method | None = None,
    limit: int = EXACT_SUM_LIMIT,
) -> PValueReport:
    """Fill a :class:`PValueReport`, choosing the evaluation method.

    By default: exact summation when ``m_t + 1 <= limit``, the integral
    approximation for larger finite spaces, and ``p_upper`` itself when
    the space is effectively infinite. ``method`` forces a choice.
    ``b == m`` gives exactly 1 under every method.
    """
    pu = p_upper(outcome)
    p_hat = outcome.b / outcome.m
    if method is None:
        if not space.finite:
            method = Method.UPPER_BOUND_LIMIT
        elif space.m_t + 1 <= limit:
            method = Method.EXACT_SUM
        else:
            method = Method.INTEGRAL_APPROX

    if outcome.b == outcome.m and method is not Method.UPPER_BOUND_LIMIT:
        # every term of the sum is F(m; m, p) = 1
        value, bound = 1.0, 0.0
    elif method is Method.EXACT_SUM:
        value = p_exact_sum(outcome, space, limit=max(limit, _require_finite(space) + 1))
        bound = EXACT_SUM_RTOL * value
    elif method is Method.INTEGRAL_APPROX:
        m_t = _require_finite(space)
        value, quad_err = _integral_parts(outcome, m_t)
        bound = quad_err + discretization_bound(outcome, m_t)
    elif method is Method.UPPER_BOUND_LIMIT:
        value = pu
        # 0 <= p_upper - p_exact <= 1/(m_t+1) since F is decreasing in p
        bound = 0.0 if space.m_t is None else 1.0 / (space.m_t + 1)
    elif method is Method.DISTINCT_SAMPLE:
        value, bound = pu, 0.0
    else:  # pragma: no cover
        raise ExactPermError(f"unknown method {method!r}")
    return PValueReport(p_hat=p_hat, p_upper=pu, p_exact=value, method=method, abs_error_bound=bound)


def type1_rate(m: int, alpha: float) -> float:
    """Size of the test that rejects when ``b/m <= alpha``.

    Under the null ``b`` is uniform on ``0..m``, so the size is
    ``(floor(m*alpha) + 1) / (m + 1)``. The floor is taken so that it
    agrees with the floating-point comparison ``b/m <= alpha``.
    """
    m = int(m)
    if m < 1:
        raise ExactPermError(f"m must be >= 1, got {m}")
    if not 0 <= alpha <= 1:
        raise ExactPermError(f"alpha must lie in [0, 1], got {alpha}")
    k = min(math.floor(m * alpha), m)
    while k < m and (k + 1) / m <= alpha:
        k += 1
    while k >= 0 and k / m > alpha:
        k -= 1
    return (k + 1) / (m + 1)
