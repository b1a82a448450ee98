"""
Exact p-values for a small two-group experiment
===============================================

Two groups of five observations admit only 252 distinct labelings, so
drawing 100 random permutations with replacement repeats some of them.
The usual estimate b/m is then invalid and (b+1)/(m+1) is conservative.
"""

from exactperm import GroupConfig, NullSpace, TestOutcome, count_space, p_exact

# One-sided statistic: every labeling gives its own value.
count = count_space(GroupConfig((5, 5)))
space = NullSpace.from_count(count)
print(f"distinct labelings: {count.total}  ->  m_t = {space.m_t}")

# For each exceedance count b, compare the three p-values.
print(f"{'b':>3} {'p_hat':>8} {'p_exact':>12} {'p_upper':>8}")
for b in range(8):
    rep = p_exact(TestOutcome(b, 100), space)
    print(f"{b:>3} {rep.p_hat:>8.4f} {rep.p_exact:>12.9f} {rep.p_upper:>8.4f}")

# Large spaces use the integral approximation instead. Its error is
# largest at b=0 and shrinks as m_t grows; the reported bound covers it.
from exactperm import Method

for b in (0, 4):
    exact = p_exact(TestOutcome(b, 100), space, method=Method.EXACT_SUM)
    approx = p_exact(TestOutcome(b, 100), space, method=Method.INTEGRAL_APPROX)
    print(f"b={b}: exact {exact.p_exact:.9f}, integral {approx.p_exact:.9f} (bound {approx.abs_error_bound:.1e})")
