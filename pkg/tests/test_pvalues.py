import math

import mpmath
import numpy as np
import pytest
from scipy import stats
from hypothesis import given, settings
from hypothesis import strategies as st

from exactperm.combinatorics import GroupConfig, count_space
from exactperm.exceptions import ExactPermError, ThresholdExceeded
from exactperm.pvalues import (
    EXACT_SUM_LIMIT,
    Method,
    NullSpace,
    TestOutcome,
    binomial_cdf,
    discretization_bound,
    p_exact,
    p_exact_integral,
    p_exact_sum,
    p_upper,
    type1_rate,
)

# Reference values: m=100 permutations, two groups of five, one-sided (m_t = 251)
TABLE1_EXACT = [0.008047755, 0.017818517, 0.027718516, 0.037619829, 0.047520825, 0.057421814, 0.067322804, 0.077223794]
TABLE1_INTEGRAL = [0.008101416, 0.017829558, 0.027719402, 0.037619855, 0.047520824, 0.057421814, 0.067322804, 0.077223794]


def naive_cdf(b, m, p):
    return sum(math.comb(m, i) * p**i * (1 - p) ** (m - i) for i in range(b + 1))


def mp_cdf(b, m, p):
    """High-precision reference, summing the shorter tail."""
    with mpmath.workdps(60):
        p = mpmath.mpf(p)
        term = lambda i: mpmath.binomial(m, i) * p**i * (1 - p) ** (m - i)  # noqa: E731
        if b > m // 2:
            return 1 - mpmath.fsum(term(i) for i in range(b + 1, m + 1))
        return mpmath.fsum(term(i) for i in range(b + 1))


outcomes = st.integers(1, 400).flatmap(lambda m: st.tuples(st.integers(0, m), st.just(m)))


class TestTypes:
    def test_outcome_rejects_b_above_m(self):
        with pytest.raises(ExactPermError):
            TestOutcome(5, 4)

    @pytest.mark.parametrize("b, m", [(-1, 3), (0, 0)])
    def test_outcome_domain(self, b, m):
        with pytest.raises(ExactPermError):
            TestOutcome(b, m)

    def test_null_space_from_count(self):
        space = NullSpace.from_count(count_space(GroupConfig((5, 5))))
        assert space.m_t == 251 and space.finite

    def test_null_space_overflow(self):
        assert NullSpace(2**53).overflowed
        assert not NullSpace(2**53 - 1).overflowed
        assert NullSpace(None).overflowed


class TestUpper:
    def test_table_values(self):
        assert p_upper(TestOutcome(0, 100)) == pytest.approx(1 / 101, abs=1e-15)
        assert round(p_upper(TestOutcome(0, 100)), 4) == 0.0099
        assert round(p_upper(TestOutcome(4, 100)), 4) == 0.0495

    @given(st.integers(1, 10**6))
    def test_full_count_is_one(self, m):
        assert p_upper(TestOutcome(m, m)) == 1.0


class TestBinomialCdf:
    @given(st.integers(0, 500), st.floats(0, 1))
    def test_full_support(self, m, p):
        assert binomial_cdf(m, m, p) == 1.0

    @pytest.mark.parametrize("m, p", [(1, 0.3), (10, 0.5), (100, 0.01), (1000, 0.999)])
    def test_zero_is_single_term(self, m, p):
        assert binomial_cdf(0, m, p) == pytest.approx((1 - p) ** m, rel=1e-12)

    def test_symmetric_half(self):
        assert binomial_cdf(2, 5, 0.5) == pytest.approx(0.5, rel=1e-15)

    def test_naive_four_terms(self):
        p = 1 / 252
        assert binomial_cdf(3, 100, p) == pytest.approx(naive_cdf(3, 100, p), rel=1e-12)

    @pytest.mark.parametrize(
        "b, m, p",
        [
            (500, 10**6, 4e-4),
            (400, 10**6, 5e-4),
            (2000, 10**6, 2e-3),
            (999_990, 10**6, 0.99999),
            (100, 10**5, 1e-3),
            (30, 64, 0.999),
            (0, 1000, 0.5),
            (3, 100, 1 / 252),
        ],
    )
    def test_relative_accuracy_against_mpmath(self, b, m, p):
        exact = mp_cdf(b, m, p)
        assert abs(binomial_cdf(b, m, p) - exact) <= 1e-12 * exact

    def test_vectorized(self):
        p = np.linspace(0, 1, 11)
        out = binomial_cdf(3, 10, p)
        assert out.shape == (11,)
        assert out[0] == 1.0 and out[-1] == 0.0
        np.testing.assert_allclose(out[1:-1], [naive_cdf(3, 10, x) for x in p[1:-1]], rtol=1e-13)

    @pytest.mark.parametrize("args", [(4, 3, 0.5), (-1, 3, 0.5), (1, 3, 1.5), (1, 3, -0.1)])
    def test_domain(self, args):
        with pytest.raises(ExactPermError):
            binomial_cdf(*args)


class TestExactSum:
    @pytest.mark.parametrize("b, expected", list(enumerate(TABLE1_EXACT)))
    def test_table1(self, b, expected):
        assert p_exact_sum(TestOutcome(b, 100), NullSpace(251)) == pytest.approx(expected, abs=1e-9)

    @pytest.mark.parametrize("m, m_t", [(1, 1), (50, 7), (100, 9999)])
    def test_full_count(self, m, m_t):
        assert p_exact_sum(TestOutcome(m, m), NullSpace(m_t)) == 1.0

    def test_two_stage_monte_carlo(self):
        # B_t uniform on 0..4, then B ~ Binomial(3, (B_t+1)/5)
        n = 10**7
        rng = np.random.default_rng(20101031)
        bt = rng.integers(0, 5, n)
        draws = rng.binomial(3, (bt + 1) / 5)
        est = np.mean(draws <= 1)
        se = math.sqrt(est * (1 - est) / n)
        assert abs(p_exact_sum(TestOutcome(1, 3), NullSpace(4)) - est) <= 3 * se

    def test_threshold(self):
        with pytest.raises(ThresholdExceeded):
            p_exact_sum(TestOutcome(1, 10), NullSpace(EXACT_SUM_LIMIT))
        p_exact_sum(TestOutcome(1, 10), NullSpace(EXACT_SUM_LIMIT - 1))

    def test_needs_finite_space(self):
        with pytest.raises(ExactPermError):
            p_exact_sum(TestOutcome(1, 10), NullSpace(None))


class TestIntegral:
    @pytest.mark.parametrize("b, expected", list(enumerate(TABLE1_INTEGRAL)))
    def test_table1(self, b, expected):
        assert p_exact_integral(TestOutcome(b, 100), NullSpace(251)) == pytest.approx(expected, abs=1e-9)

    def test_huge_space_tends_to_upper(self):
        value = p_exact_integral(TestOutcome(0, 100), NullSpace(10**12))
        assert 0 < 1 / 101 - value < 1e-9

    def test_correction_matches_closed_form(self):
        # b=0: integral of (1-p)^m over [0, w] is (1 - (1-w)^(m+1)) / (m+1)
        m, m_t = 37, 500
        w = 0.5 / (m_t + 1)
        expected = 1 / (m + 1) - (1 - (1 - w) ** (m + 1)) / (m + 1)
        assert p_exact_integral(TestOutcome(0, m), NullSpace(m_t)) == pytest.approx(expected, rel=1e-13)


class TestDispatch:
    def test_table_row(self):
        rep = p_exact(TestOutcome(2, 100), NullSpace(251))
        assert rep.method is Method.EXACT_SUM
        assert rep.p_hat == 0.02
        assert rep.p_upper == pytest.approx(0.0297, abs=1e-4)
        assert rep.p_exact == pytest.approx(0.027718516, abs=1e-9)

    def test_infinite_space(self):
        rep = p_exact(TestOutcome(0, 1000), NullSpace(None))
        assert rep.method is Method.UPPER_BOUND_LIMIT
        assert rep.p_exact == rep.p_upper == 1 / 1001

    def test_overflowed_space_reports_cap(self):
        rep = p_exact(TestOutcome(3, 1000), NullSpace.from_count(count_space(GroupConfig((30, 30)))))
        assert rep.method is Method.UPPER_BOUND_LIMIT
        assert rep.abs_error_bound == pytest.approx(1 / 118264581564861424)

    def test_large_finite_space_uses_integral(self):
        rep = p_exact(TestOutcome(3, 1000), NullSpace(10**6))
        assert rep.method is Method.INTEGRAL_APPROX

    def test_methods_agree_at_b5(self):
        o, s = TestOutcome(5, 100), NullSpace(251)
        exact = p_exact(o, s)
        approx = p_exact(o, s, method=Method.INTEGRAL_APPROX)
        assert abs(exact.p_exact - approx.p_exact) < 5e-5
        assert exact.p_exact == pytest.approx(0.057421814, abs=1e-9)
        assert approx.p_exact == pytest.approx(0.057421814, abs=1e-9)

    def test_report_invariants(self):
        for b in range(0, 101, 5):
            rep = p_exact(TestOutcome(b, 100), NullSpace(251))
            assert 0 <= rep.p_hat <= rep.p_upper <= 1
            assert 0 < rep.p_exact <= rep.p_upper


class TestType1Rate:
    def test_m20(self):
        assert type1_rate(20, 0.05) == pytest.approx(2 / 21, rel=1e-15)
        assert type1_rate(20, 0.25) == pytest.approx(6 / 21, rel=1e-15)

    @given(st.integers(1, 5000))
    def test_alpha_one(self, m):
        assert type1_rate(m, 1.0) == 1.0

    @given(st.integers(1, 5000), st.floats(0, 1, exclude_max=True))
    def test_never_below_floor(self, m, frac):
        alpha = frac / (m + 1)
        assert type1_rate(m, alpha) == 1 / (m + 1)
        assert type1_rate(100, 0.005) == 1 / 101

    @given(st.integers(2, 2000).flatmap(lambda m: st.tuples(st.just(m), st.integers(1, m // 2))))
    def test_exceeds_alpha_on_lattice(self, mi):
        m, i = mi
        assert type1_rate(m, i / m) > i / m

    @given(st.integers(1, 200), st.floats(0, 1))
    def test_agrees_with_counting(self, m, alpha):
        count = sum(1 for b in range(m + 1) if b / m <= alpha)
        assert type1_rate(m, alpha) == count / (m + 1)


class TestProperties:
    @given(outcomes, st.integers(1, 3000))
    @settings(max_examples=200, deadline=None)
    def test_ordering(self, bm, m_t):
        o, s = TestOutcome(*bm), NullSpace(m_t)
        pu = p_upper(o)
        for value in (p_exact_sum(o, s), p_exact_integral(o, s)):
            assert 0 < value <= pu
            if o.b < o.m:
                assert value < pu

    @given(st.integers(1, 200), st.integers(1, 2000))
    @settings(max_examples=40, deadline=None)
    def test_monotone_in_b(self, m, m_t):
        s = NullSpace(m_t)
        sums = [p_exact_sum(TestOutcome(b, m), s) for b in range(m + 1)]
        ints = [p_exact_integral(TestOutcome(b, m), s) for b in range(m + 1)]
        p_t = np.arange(1, m_t + 2) / (m_t + 1)
        for b in range(m):
            # exact increment of the sum is the average pmf at b+1
            step = stats.binom.pmf(b + 1, m, p_t).mean()
            assert sums[b] <= sums[b + 1]
            if step > 8 * math.ulp(sums[b + 1]):
                assert sums[b] < sums[b + 1]
            # the integral form subtracts from p_upper, so its absolute
            # resolution is set by p_upper rather than by the result
            resolution = 1e-13 * p_upper(TestOutcome(b + 1, m))
            assert ints[b] <= ints[b + 1] + resolution
            if step > resolution:
                assert ints[b] < ints[b + 1]

    @given(outcomes, st.integers(1, 10**9))
    @settings(max_examples=200, deadline=None)
    def test_convergence_gap(self, bm, m_t):
        o = TestOutcome(*bm)
        gap = p_upper(o) - p_exact_integral(o, NullSpace(m_t))
        assert 0 < gap <= 0.5 / (m_t + 1) + math.ulp(p_upper(o))

    @given(outcomes, st.integers(1, 3000))
    @settings(max_examples=200, deadline=None)
    def test_reported_bound_covers_exact(self, bm, m_t):
        o, s = TestOutcome(*bm), NullSpace(m_t)
        rep = p_exact(o, s, method=Method.INTEGRAL_APPROX)
        assert abs(rep.p_exact - p_exact_sum(o, s)) <= rep.abs_error_bound + 1e-15
        assert discretization_bound(o, m_t) >= 0

    @given(st.integers(1, 3000), st.integers(1, 60))
    @settings(max_examples=60, deadline=None)
    def test_upper_limit_bound_covers_exact(self, m_t, m):
        s = NullSpace(m_t)
        for b in range(m + 1):
            o = TestOutcome(b, m)
            rep = p_exact(o, s, method=Method.UPPER_BOUND_LIMIT)
            assert rep.p_exact - p_exact_sum(o, s) <= rep.abs_error_bound

    @pytest.mark.parametrize("m_t", [250, 251, 1000, 5000])
    @pytest.mark.parametrize("m", [10, 50, 100])
    def test_sum_integral_agreement_in_tail(self, m_t, m):
        # the 1e-4 agreement holds in the tail for moderate m; near b=m
        # the continuity correction is off by up to 0.5/(m_t+1)
        s = NullSpace(m_t)
        for b in range(m + 1):
            o = TestOutcome(b, m)
            if p_upper(o) > 0.5:
                break
            assert abs(p_exact_sum(o, s) - p_exact_integral(o, s)) <= 1e-4


class TestAllExtreme:
    @pytest.mark.parametrize("m_t", [5, 20_000, 10**12, None])
    def test_b_equals_m_is_one(self, m_t):
        for method in (None, Method.INTEGRAL_APPROX, Method.UPPER_BOUND_LIMIT):
            if m_t is None and method is Method.INTEGRAL_APPROX:
                continue
            rep = p_exact(TestOutcome(40, 40), NullSpace(m_t), method=method)
            assert rep.p_exact == rep.p_upper == 1.0
