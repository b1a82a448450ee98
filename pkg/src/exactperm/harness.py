"""Simulation experiments for the behaviour of randomization p-values.

Experiments
-----------
staircase
    Size of the test that uses ``b/m`` as its p-value, simulated under
    the two-stage null model and compared with the closed form.
ratio
    ``p_upper / p_exact`` for every possible ``b``.
fwer
    Many simultaneous null tests; counts zero ``b/m`` values and runs
    Bonferroni and Holm on both ``b/m`` and the exact p-values.
power
    Rejection rates of distinct-sample, with-replacement and exhaustive
    permutation tests on shifted two-group normal data.

Random streams: ``np.random.SeedSequence(seed).spawn(n)`` gives one
child per block of replicates (``staircase``, ``fwer``) or per replicate
(``power``); child ``i`` always handles block or replicate ``i``, so the
results do not depend on ``threads``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .combinatorics import GroupConfig, Sidedness, count_space
from .engine import (
    Dataset,
    StatisticSpec,
    exhaustive_test,
    sample_with_replacement,
    sample_without_replacement,
)
from .exceptions import ExactPermError
from .pvalues import NullSpace, TestOutcome, p_exact, type1_rate

BLOCK_SIZE = 1 << 16


@dataclass
class SimConfig:
    replicates: int = 10_000
    m: int = 20
    alpha_grid: Sequence[float] = (0.01, 0.05, 0.1)
    genes: int = 30_000
    effect_size: float = 0.0
    seed: int = 0
    sizes: Sequence[int] = (5, 5)
    m_t: int | None = None
    threads: int = 1

    def __post_init__(self):
        self.alpha_grid = tuple(float(a) for a in self.alpha_grid)
        self.sizes = tuple(int(s) for s in self.sizes)
        if self.replicates < 1:
            raise ExactPermError("replicates must be >= 1")
        if self.m < 1:
            raise ExactPermError("m must be >= 1")
        if self.genes < 1:
            raise ExactPermError("genes must be >= 1")
        a = np.asarray(self.alpha_grid)
        if a.size == 0 or np.any(a <= 0) or np.any(a >= 1) or np.any(np.diff(a) <= 0):
            raise ExactPermError("alpha_grid must be strictly increasing inside (0, 1)")
        if self.m_t is not None and self.m_t < 1:
            raise ExactPermError("m_t must be >= 1")


@dataclass
class SimReport:
    """Tidy result rows plus a JSON-able summary."""

    experiment: str
    columns: list[str]
    rows: list[dict]
    summary: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.columns, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _fmt(row[k]) for k in self.columns})
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"experiment": self.experiment, "summary": self.summary, "rows": self.rows})


def _fmt(v):
    return repr(v) if isinstance(v, float) else v


def standard_error(rate: float, n: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / n)


def _blocks(total: int) -> list[int]:
    full, rest = divmod(total, BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rest] if rest else [])


def _map_blocks(cfg: SimConfig, total: int, work: Callable[[np.random.Generator, int], np.ndarray]):
    sizes = _blocks(total)
    children = np.random.SeedSequence(cfg.seed).spawn(len(sizes))
    jobs = [(np.random.default_rng(c), s) for c, s in zip(children, sizes)]
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            parts = list(pool.map(lambda j: work(*j), jobs))
    else:
        parts = [work(*j) for j in jobs]
    return np.concatenate(parts)


def two_stage_counts(rng: np.random.Generator, size: int, m: int, m_t: int | None = None) -> np.ndarray:
    """Draw null exceedance counts ``b``.

    With ``m_t=None`` the tail probability is uniform on (0, 1); with a
    finite ``m_t`` it is ``(B_t + 1)/(m_t + 1)`` for ``B_t`` uniform on
    ``0..m_t``. Either way ``b ~ Binomial(m, tail probability)``.
    """
    if m_t is None:
        tail = rng.random(size)
    else:
        tail = (rng.integers(0, m_t + 1, size) + 1) / (m_t + 1)
    return rng.binomial(m, tail)


def type1_staircase(cfg: SimConfig) -> SimReport:
    """Empirical and theoretical ``P(b/m <= alpha)`` over ``alpha_grid``."""
    m = cfg.m
    b = _map_blocks(cfg, cfg.replicates, lambda rng, s: two_stage_counts(rng, s, m, cfg.m_t))
    n = len(b)
    counts = np.bincount(b, minlength=m + 1)
    p_hat = np.arange(m + 1) / m
    p_up = (np.arange(m + 1) + 1) / (m + 1)
    rows = []
    for alpha in cfg.alpha_grid:
        rate = counts[p_hat <= alpha].sum() / n
        rate_u = counts[p_up <= alpha].sum() / n
        rows.append(
            {
                "alpha": alpha,
                "empirical": float(rate),
                "se": standard_error(rate, n),
                "theoretical": type1_rate(m, alpha),
                "empirical_p_upper": float(rate_u),
                "se_p_upper": standard_error(rate_u, n),
            }
        )
    uniformity = stats.chisquare(counts)
    summary = {
        "m": m,
        "replicates": n,
        "b_counts": counts.tolist(),
        "uniformity_chi2": float(uniformity.statistic),
        "uniformity_pvalue": float(uniformity.pvalue),
    }
    return SimReport("staircase", list(rows[0]), rows, summary)


def ratio_curve(m: int, m_t: int) -> SimReport:
    """``p_upper / p_exact`` for ``b = 0..m``."""
    space = NullSpace(m_t)
    if not space.finite:
        raise ExactPermError("ratio_curve needs a finite m_t")
    rows = []
    for b in range(m + 1):
        rep = p_exact(TestOutcome(b, m), space)
        rows.append(
            {
                "b": b,
                "p_upper": rep.p_upper,
                "p_exact": rep.p_exact,
                "ratio": rep.p_upper / rep.p_exact,
                "method": rep.method.value,
            }
        )
    return SimReport("ratio", list(rows[0]), rows, {"m": m, "m_t": m_t})


def bonferroni(pvalues: np.ndarray, alpha: float) -> np.ndarray:
    """Reject mask for the Bonferroni procedure."""
    p = np.asarray(pvalues, dtype=float)
    return p <= alpha / len(p)


def holm(pvalues: np.ndarray, alpha: float) -> np.ndarray:
    """Reject mask for Holm's step-down procedure."""
    p = np.asarray(pvalues, dtype=float)
    n = len(p)
    order = np.argsort(p, kind="stable")
    passes = p[order] <= alpha / (n - np.arange(n))
    # stop at the first acceptance
    n_reject = n if passes.all() else int(np.argmin(passes))
    reject = np.zeros(n, dtype=bool)
    reject[order[:n_reject]] = True
    return reject


def _exact_pvalues(b: np.ndarray, m: int, space: NullSpace) -> np.ndarray:
    table = {int(v): p_exact(TestOutcome(int(v), m), space).p_exact for v in np.unique(b)}
    return np.array([table[int(v)] for v in b])


def _full_data_counts(cfg: SimConfig, spec: StatisticSpec) -> np.ndarray:
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.genes)
    labels = np.repeat(np.arange(len(cfg.sizes)), cfg.sizes)
    out = np.empty(cfg.genes, dtype=np.int64)
    for i, child in enumerate(children):
        data_seed, perm_seed = child.generate_state(2, dtype=np.uint64)
        values = np.random.default_rng(int(data_seed)).standard_normal(len(labels))
        res = sample_with_replacement(Dataset(values, labels), spec, cfg.m, seed=int(perm_seed))
        out[i] = res.outcome.b
    return out


def fwer_demo(cfg: SimConfig, mode: str = "two-stage") -> SimReport:
    """Family-wise behaviour of ``b/m`` versus exact p-values under the null.

    ``mode="two-stage"`` draws ``b`` from the two-stage null model with
    ``cfg.m_t`` (``None`` for an effectively infinite space);
    ``mode="full"`` simulates normal data of ``cfg.sizes`` for every gene
    and runs a with-replacement permutation test on each.
    """
    m = cfg.m
    if mode == "two-stage":
        b = _map_blocks(cfg, cfg.genes, lambda rng, s: two_stage_counts(rng, s, m, cfg.m_t))
        space = NullSpace(cfg.m_t)
    elif mode == "full":
        spec = StatisticSpec()
        b = _full_data_counts(cfg, spec)
        space = NullSpace.from_count(count_space(GroupConfig(cfg.sizes, spec.sidedness)))
    else:
        raise ExactPermError(f"unknown fwer mode {mode!r}")
    p_hat = b / m
    p_ex = _exact_pvalues(b, m, space)
    rows = []
    for alpha in cfg.alpha_grid:
        rows.append(
            {
                "alpha": alpha,
                "bonferroni_p_hat": int(bonferroni(p_hat, alpha).sum()),
                "holm_p_hat": int(holm(p_hat, alpha).sum()),
                "bonferroni_p_exact": int(bonferroni(p_ex, alpha).sum()),
                "holm_p_exact": int(holm(p_ex, alpha).sum()),
            }
        )
    zeros = int(np.count_nonzero(b == 0))
    summary = {
        "mode": mode,
        "genes": cfg.genes,
        "m": m,
        "m_t": space.m_t,
        "zero_p_hat": zeros,
        "expected_zero_p_hat": cfg.genes / (m + 1) if mode == "two-stage" and cfg.m_t is None else None,
        "min_p_exact": float(p_ex.min()),
    }
    return SimReport("fwer", list(rows[0]), rows, summary)


def _power_replicate(child: np.random.SeedSequence, cfg: SimConfig, spec: StatisticSpec, labels, shift, exhaustive: bool):
    data_seed, with_seed, without_seed = (int(s) for s in child.generate_state(3, dtype=np.uint64))
    values = np.random.default_rng(data_seed).standard_normal(len(labels)) + shift
    data = Dataset(values, labels)
    p_wo = sample_without_replacement(data, spec, cfg.m, seed=without_seed).report.p_exact
    p_w = sample_with_replacement(data, spec, cfg.m, seed=with_seed).report.p_exact
    p_ex = exhaustive_test(data, spec).report.p_exact if exhaustive else math.nan
    return p_wo, p_w, p_ex


def power_compare(cfg: SimConfig, spec: StatisticSpec | None = None, exhaustive: bool = True) -> SimReport:
    """Rejection rates of the three sampling schemes at each alpha.

    Group 0 is shifted up by ``cfg.effect_size``; the statistic is
    one-sided difference of means unless ``spec`` says otherwise.
    Without-replacement tests report ``(b+1)/(m+1)``; with-replacement
    tests report the exact p-value.
    """
    spec = spec or StatisticSpec()
    if cfg.effect_size < 0:
        raise ExactPermError("effect_size must be >= 0")
    config = GroupConfig(cfg.sizes, spec.sidedness)
    m_t = count_space(config).m_t
    if cfg.m > m_t:
        raise ExactPermError(f"m={cfg.m} exceeds m_t={m_t} for sizes {cfg.sizes}")
    labels = np.repeat(np.arange(len(cfg.sizes)), cfg.sizes)
    shift = np.where(labels == 0, cfg.effect_size, 0.0)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.replicates)
    run = lambda c: _power_replicate(c, cfg, spec, labels, shift, exhaustive)  # noqa: E731
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            results = list(pool.map(run, children))
    else:
        results = [run(c) for c in children]
    p = np.array(results)
    n = cfg.replicates
    rows = []
    for alpha in cfg.alpha_grid:
        rates = [(p[:, j] <= alpha).mean() for j in range(3)]
        row = {"alpha": alpha}
        for name, rate in zip(("without_replacement", "with_replacement", "exhaustive"), rates):
            rate = float(rate) if (name != "exhaustive" or exhaustive) else math.nan
            row[f"power_{name}"] = rate
            row[f"se_{name}"] = standard_error(rate, n) if not math.isnan(rate) else math.nan
        rows.append(row)
    summary = {"sizes": list(cfg.sizes), "m": cfg.m, "m_t": m_t, "effect_size": cfg.effect_size, "replicates": n}
    return SimReport("power", list(rows[0]), rows, summary)


def config_dict(cfg: SimConfig) -> dict:
    d = asdict(cfg)
    d["alpha_grid"] = list(cfg.alpha_grid)
    d["sizes"] = list(cfg.sizes)
    return d
