"""Permutation tests on two-group data.

Three sampling modes are supported:

* ``WITH_REPLACEMENT``: ``m`` independent uniformly random labelings,
  repeats and the original labeling allowed; reported with the exact
  p-value for that scheme.
* ``WITHOUT_REPLACEMENT``: ``m`` distinct labelings other than the
  original, drawn by sampling distinct ranks and unranking them; the
  p-value ``(b+1)/(m+1)`` is then exact.
* ``EXHAUSTIVE``: every distinct labeling.

An observation counts towards ``b`` when its statistic is ``>=`` the
observed one. Statistics are computed by summing each group's values in
ascending observation order, so the same partition always reproduces
the same float bits and ties with the original labeling compare equal.

Seeds map to streams through ``numpy.random.default_rng(seed)`` (PCG64).
"""

from __future__ import annotations

import csv
import enum
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .combinatorics import (
    GroupConfig,
    Sidedness,
    assignment_table,
    count_space,
    rank,
    unrank,
)
from .exceptions import (
    BudgetExceeded,
    DegenerateStatistic,
    ExactPermError,
    NotEnoughPermutations,
    UnrankUnavailable,
)
from .pvalues import Method, NullSpace, PValueReport, TestOutcome, p_exact

DEFAULT_ENUMERATION_BUDGET = 10**6

# unranking through a precomputed table is used up to this many labelings
_TABLE_LIMIT = 1 << 16


class StatisticKind(enum.Enum):
    DIFF_OF_MEANS = "diff"
    TWO_SAMPLE_T = "t"


class Sampling(enum.Enum):
    WITH_REPLACEMENT = "with-replacement"
    WITHOUT_REPLACEMENT = "without-replacement"
    EXHAUSTIVE = "exhaustive"


@dataclass(frozen=True)
class StatisticSpec:
    kind: StatisticKind = StatisticKind.DIFF_OF_MEANS
    sidedness: Sidedness = Sidedness.ONE_SIDED


@dataclass(frozen=True)
class Dataset:
    """Observations with integer group labels ``0..k-1``.

    ``group_names`` keeps the original labels, in first-appearance order
    when built by :meth:`from_labels`.
    """

    values: np.ndarray
    labels: np.ndarray
    group_names: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        labels = np.asarray(self.labels, dtype=np.int64)
        if values.ndim != 1 or labels.ndim != 1 or len(values) != len(labels):
            raise ExactPermError("values and labels must be 1-d and of equal length")
        if not np.all(np.isfinite(values)):
            raise ExactPermError("values must be finite")
        k = int(labels.max()) + 1 if len(labels) else 0
        if labels.min(initial=0) < 0 or len(np.unique(labels)) != k:
            raise ExactPermError("labels must be the integers 0..k-1, each used")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        if not self.group_names:
            object.__setattr__(self, "group_names", tuple(str(g) for g in range(k)))

    @classmethod
    def from_labels(cls, values: Sequence[float], labels: Sequence) -> "Dataset":
        """Map arbitrary labels to groups in order of first appearance."""
        names: dict = {}
        codes = [names.setdefault(g, len(names)) for g in labels]
        return cls(np.asarray(values, dtype=float), np.asarray(codes), tuple(str(g) for g in names))

    @classmethod
    def from_csv(cls, path: str | os.PathLike) -> "Dataset":
        """Read a ``value,group`` file with a header row."""
        values, labels = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip().lower() for h in header[:2]] != ["value", "group"]:
                raise ExactPermError(f"{path}: expected header 'value,group', got {header}")
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) < 2:
                    raise ExactPermError(f"{path}:{lineno}: expected two columns")
                try:
                    values.append(float(row[0]))
                except ValueError:
                    raise ExactPermError(f"{path}:{lineno}: bad value {row[0]!r}") from None
                labels.append(row[1].strip())
        if not values:
            raise ExactPermError(f"{path}: no observations")
        return cls.from_labels(values, labels)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(np.bincount(self.labels).tolist())

    def config(self, sidedness: Sidedness = Sidedness.ONE_SIDED) -> GroupConfig:
        return GroupConfig(self.sizes, sidedness)


@dataclass(frozen=True)
class PermTestResult:
    t_obs: float
    outcome: TestOutcome
    space: NullSpace
    report: PValueReport
    sampling: Sampling
    seed: int | None
    warnings: tuple[str, ...] = field(default=())

    def as_dict(self) -> dict:
        return {
            "t_obs": self.t_obs,
            "b": self.outcome.b,
            "m": self.outcome.m,
            "m_t": self.space.m_t,
            "space_overflowed": self.space.overflowed,
            "sampling": self.sampling.value,
            "seed": self.seed,
            **self.report.as_dict(),
            "warnings": list(self.warnings),
        }


def _statistics(values: np.ndarray, assignments: np.ndarray, spec: StatisticSpec) -> np.ndarray:
    """Statistic for every row of an ``(r, n)`` label array."""
    in0 = assignments == 0
    n0 = in0.sum(axis=1)
    n1 = assignments.shape[1] - n0
    s0 = np.where(in0, values, 0.0).sum(axis=1)
    s1 = np.where(in0, 0.0, values).sum(axis=1)
    mean0, mean1 = s0 / n0, s1 / n1
    diff = mean0 - mean1
    if spec.kind is StatisticKind.TWO_SAMPLE_T:
        dev0 = np.where(in0, values - mean0[:, None], 0.0)
        dev1 = np.where(in0, 0.0, values - mean1[:, None])
        ss = (dev0 * dev0).sum(axis=1) + (dev1 * dev1).sum(axis=1)
        pooled = ss / (n0 + n1 - 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            stat = diff / np.sqrt(pooled * (1.0 / n0 + 1.0 / n1))
    else:
        stat = diff
    if spec.sidedness is Sidedness.TWO_SIDED:
        stat = np.abs(stat)
    return stat


def _check_supported(data: Dataset, spec: StatisticSpec) -> None:
    if len(data.sizes) != 2:
        raise ExactPermError(f"statistics are defined for two groups, got {len(data.sizes)}")
    if spec.kind is StatisticKind.TWO_SAMPLE_T and min(data.sizes) < 2:
        raise ExactPermError("the t-statistic needs at least two observations per group")


def compute_statistic(data: Dataset, spec: StatisticSpec) -> float:
    """Observed statistic: mean(group 0) - mean(group 1) or the pooled t.

    Raises
    ------
    DegenerateStatistic
        When the pooled variance of the t-statistic is zero.
    """
    _check_supported(data, spec)
    t = float(_statistics(data.values, data.labels[None, :], spec)[0])
    if not math.isfinite(t):
        raise DegenerateStatistic("pooled within-group variance is zero")
    return t


def _count_extreme(stats: np.ndarray, t_obs: float) -> int:
    # NaN (degenerate permuted statistic) never counts as extreme
    return int(np.count_nonzero(stats >= t_obs))


def _tie_warnings(data: Dataset) -> tuple[str, ...]:
    if len(np.unique(data.values)) < len(data.values):
        return ("tied values: distinct statistics may be fewer than m_t, p-values are conservative",)
    return ()


def _resolve_seed(seed: int | None) -> int:
    if seed is None:
        return int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])
    return int(seed)


def random_assignments(sizes: Sequence[int], m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` independent uniform labelings as an ``(m, n)`` label array.

    Each row shuffles the observation indices and gives the first
    ``sizes[0]`` positions group 0, the next ``sizes[1]`` group 1, etc.
    """
    n = int(sum(sizes))
    base = np.repeat(np.arange(len(sizes), dtype=np.int8), sizes)
    order = rng.permuted(np.tile(np.arange(n), (m, 1)), axis=1)
    out = np.empty((m, n), dtype=np.int8)
    np.put_along_axis(out, order, np.broadcast_to(base, (m, n)), axis=1)
    return out


def sample_distinct(population: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` distinct integers from ``range(population)``, sorted.

    Large populations are never materialized.
    """
    if not 0 <= m <= population:
        raise NotEnoughPermutations(f"cannot draw {m} distinct values from {population}")
    return np.sort(rng.choice(population, m, replace=False, shuffle=False).astype(np.int64))


def _unrank_many(config: GroupConfig, ranks: np.ndarray) -> np.ndarray:
    if count_space(config).total <= _TABLE_LIMIT:
        return assignment_table(config)[ranks]
    return np.array([unrank(config, int(r)) for r in ranks], dtype=np.int8).reshape(len(ranks), config.n)


def sample_with_replacement(data: Dataset, spec: StatisticSpec, m: int, seed: int | None = None) -> PermTestResult:
    """Permutation test from ``m`` labelings drawn with replacement."""
    if m < 1:
        raise ExactPermError(f"m must be >= 1, got {m}")
    t_obs = compute_statistic(data, spec)
    seed = _resolve_seed(seed)
    rng = np.random.default_rng(seed)
    stats = _statistics(data.values, random_assignments(data.sizes, m, rng), spec)
    outcome = TestOutcome(_count_extreme(stats, t_obs), m)
    space = NullSpace.from_count(count_space(data.config(spec.sidedness)))
    return PermTestResult(
        t_obs=t_obs,
        outcome=outcome,
        space=space,
        report=p_exact(outcome, space),
        sampling=Sampling.WITH_REPLACEMENT,
        seed=seed,
        warnings=_tie_warnings(data),
    )


def _exact_space(data: Dataset, spec: StatisticSpec) -> tuple[GroupConfig, int]:
    config = data.config(spec.sidedness)
    count = count_space(config)
    if count.overflowed:
        raise UnrankUnavailable(
            f"{count.total} labelings exceed 2**53; sample with replacement instead"
        )
    return config, count.total


def _distinct_result(data, spec, t_obs, assignments, total, sampling, seed) -> PermTestResult:
    stats = _statistics(data.values, assignments, spec)
    outcome = TestOutcome(_count_extreme(stats, t_obs), len(assignments))
    space = NullSpace(total - 1)
    return PermTestResult(
        t_obs=t_obs,
        outcome=outcome,
        space=space,
        report=p_exact(outcome, space, method=Method.DISTINCT_SAMPLE),
        sampling=sampling,
        seed=seed,
        warnings=_tie_warnings(data),
    )


def sample_without_replacement(data: Dataset, spec: StatisticSpec, m: int, seed: int | None = None) -> PermTestResult:
    """Permutation test from ``m`` distinct non-original labelings.

    Raises
    ------
    NotEnoughPermutations
        If ``m`` exceeds ``m_t``.
    UnrankUnavailable
        If the space count overflowed.
    """
    if m < 1:
        raise ExactPermError(f"m must be >= 1, got {m}")
    config, total = _exact_space(data, spec)
    if m > total - 1:
        raise NotEnoughPermutations(f"m={m} exceeds m_t={total - 1}")
    t_obs = compute_statistic(data, spec)
    seed = _resolve_seed(seed)
    rng = np.random.default_rng(seed)
    original = rank(config, data.labels)
    ranks = sample_distinct(total - 1, m, rng)
    ranks[ranks >= original] += 1  # skip the original labeling
    return _distinct_result(
        data, spec, t_obs, _unrank_many(config, ranks), total, Sampling.WITHOUT_REPLACEMENT, seed
    )


def exhaustive_test(data: Dataset, spec: StatisticSpec, budget: int = DEFAULT_ENUMERATION_BUDGET) -> PermTestResult:
    """Evaluate every distinct labeling; ``p = (b_t + 1) / (m_t + 1)``."""
    config, total = _exact_space(data, spec)
    if total > budget:
        raise BudgetExceeded(f"{total} labelings exceed the enumeration budget {budget}")
    if total < 2:
        raise NotEnoughPermutations("only the original labeling exists")
    t_obs = compute_statistic(data, spec)
    original = rank(config, data.labels)
    others = np.delete(assignment_table(config), original, axis=0)
    return _distinct_result(data, spec, t_obs, others, total, Sampling.EXHAUSTIVE, None)
