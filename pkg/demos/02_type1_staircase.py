"""
How often does b/m reject a true null?
======================================

Under the null hypothesis b is uniform on 0..m, so rejecting when
b/m <= alpha has size (floor(m*alpha)+1)/(m+1). With m=20 this staircase
sits above alpha just after each step.
"""

import numpy as np

from exactperm import type1_rate
from exactperm.harness import SimConfig, type1_staircase

alphas = np.round(np.arange(1, 100) / 100, 2)
report = type1_staircase(SimConfig(replicates=10**6, m=20, alpha_grid=alphas, seed=2))

# Simulated and theoretical sizes side by side at a few levels.
for row in report.rows[::10]:
    print(f"alpha {row['alpha']:.2f}: simulated {row['empirical']:.4f} +- {row['se']:.4f}, theory {row['theoretical']:.4f}")

# The smallest size b/m can attain is 1/21, however small alpha is.
print("size at alpha=0.001:", type1_rate(20, 0.001))

# (b+1)/(m+1) never exceeds alpha beyond Monte Carlo noise.
excess = report.column("empirical_p_upper") - alphas
print(f"largest excess of p_upper's size over alpha: {excess.max():.4f}")
