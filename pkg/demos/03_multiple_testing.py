"""
Zero p-values and Bonferroni
============================

With 30,000 true nulls and 1000 permutations each, about 30 tests see
b=0. Their estimated p-value is 0, which survives any Bonferroni
threshold. The exact p-value is at least 1/1001, which never does.
"""

from exactperm.harness import SimConfig, fwer_demo

report = fwer_demo(SimConfig(genes=30_000, m=1000, alpha_grid=(0.05,), seed=3))
summary = report.summary
print(f"tests with b=0: {summary['zero_p_hat']} (expected {summary['expected_zero_p_hat']:.2f})")

row = report.rows[0]
print(f"Bonferroni rejections at 0.05 using b/m:     {row['bonferroni_p_hat']}")
print(f"Bonferroni rejections at 0.05 using p_exact: {row['bonferroni_p_exact']}")
print(f"smallest exact p-value: {summary['min_p_exact']:.6f} vs threshold {0.05 / 30_000:.2e}")
