"""Counting and indexing group-label assignments.

An *assignment* is a tuple giving the group index (0-based) of every
observation, e.g. ``(0, 0, 1)`` puts observations 0 and 1 in the first
group and observation 2 in the second.

Assignments are ordered canonically so that every distinct value of a
permuted statistic has exactly one integer rank:

* two groups: lexicographic order of the sorted index set of group 0
  (the combinatorial number system);
* three or more groups: mixed radix over nested combinations, group 0
  chosen from all indices first (most significant digit), then group 1
  from what is left, and so on;
* two-sided statistics on two equal groups: only assignments with
  observation 0 in group 0 are kept, since swapping the groups gives the
  same absolute statistic. In lexicographic order these are exactly the
  first half of the ranks.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .exceptions import ExactPermError, UnrankUnavailable

#: Counts above this value cannot round-trip through a float64 exactly.
OVERFLOW_THRESHOLD = 2**53


class Sidedness(enum.Enum):
    ONE_SIDED = "one"
    TWO_SIDED = "two"


@dataclass(frozen=True)
class GroupConfig:
    """Group sizes ``n_1..n_k`` plus the sidedness of the statistic."""

    sizes: tuple[int, ...]
    sidedness: Sidedness = Sidedness.ONE_SIDED

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if len(sizes) < 2:
            raise ExactPermError(f"need at least two groups, got {len(sizes)}")
        if any(s < 1 for s in sizes):
            raise ExactPermError(f"group sizes must be positive, got {sizes}")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "sidedness", Sidedness(self.sidedness))

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def k(self) -> int:
        return len(self.sizes)

    @property
    def balanced_two_sided(self) -> bool:
        """True when group reversal leaves the statistic unchanged."""
        return (
            self.sidedness is Sidedness.TWO_SIDED
            and self.k == 2
            and self.sizes[0] == self.sizes[1]
        )


@dataclass(frozen=True)
class SpaceCount:
    """Number of distinct achievable statistic values, ``m_t + 1``.

    ``total`` is always the exact integer; ``overflowed`` flags counts
    beyond :data:`OVERFLOW_THRESHOLD`, where callers should treat the
    space as effectively infinite.
    """

    total: int
    overflowed: bool

    @property
    def m_t(self) -> int:
        return self.total - 1


def multinomial(sizes: Sequence[int]) -> int:
    """Exact multinomial coefficient ``(sum sizes)! / prod(size!)``."""
    out, seen = 1, 0
    for s in sizes:
        seen += s
        out *= math.comb(seen, s)
    return out


def count_space(config: GroupConfig) -> SpaceCount:
    """Count the distinct labelings ``m_t + 1`` for ``config``.

    One-sided or unequal two-group comparisons give ``C(n1 + n2, n1)``;
    a two-sided comparison of equal groups gives half of that; three or
    more groups give the multinomial coefficient.

    Raises
    ------
    ExactPermError
        For two-sided statistics on three or more groups where some sizes
        repeat; the collision structure then depends on the statistic.
    """
    if (
        config.k >= 3
        and config.sidedness is Sidedness.TWO_SIDED
        and len(set(config.sizes)) < config.k
    ):
        raise ExactPermError(
            "two-sided statistics with three or more groups of repeated sizes "
            f"have no defined collision count: {config.sizes}"
        )
    total = multinomial(config.sizes)
    if config.balanced_two_sided:
        total //= 2
    return SpaceCount(total=total, overflowed=total > OVERFLOW_THRESHOLD)


def _unrank_combination(r: int, n: int, c: int) -> list[int]:
    # lexicographic: skip whole blocks of combinations starting with x
    out = []
    x = 0
    for remaining in range(c, 0, -1):
        while True:
            block = math.comb(n - x - 1, remaining - 1)
            if r < block:
                break
            r -= block
            x += 1
        out.append(x)
        x += 1
    return out


def _rank_combination(elems: Sequence[int], n: int) -> int:
    r, prev, c = 0, -1, len(elems)
    for i, e in enumerate(elems):
        for x in range(prev + 1, e):
            r += math.comb(n - x - 1, c - i - 1)
        prev = e
    return r


def _exact_count(config: GroupConfig) -> int:
    count = count_space(config)
    if count.overflowed:
        raise UnrankUnavailable(
            f"space of {count.total} labelings exceeds 2**53; ranks are unavailable"
        )
    return count.total


def unrank(config: GroupConfig, rank_: int) -> tuple[int, ...]:
    """Return the assignment with canonical rank ``rank_``."""
    total = _exact_count(config)
    rank_ = int(rank_)
    if not 0 <= rank_ < total:
        raise ExactPermError(f"rank {rank_} outside [0, {total})")

    labels = [config.k - 1] * config.n
    free = list(range(config.n))
    radices = [math.comb(sum(config.sizes[j:]), config.sizes[j]) for j in range(config.k - 1)]
    # peel mixed-radix digits, least significant (last chosen group) first
    digits = []
    for radix in reversed(radices):
        rank_, d = divmod(rank_, radix)
        digits.append(d)
    digits.reverse()
    for group, (size, d) in enumerate(zip(config.sizes, digits)):
        picked = _unrank_combination(d, len(free), size)
        for pos in picked:
            labels[free[pos]] = group
        picked_set = set(picked)
        free = [f for i, f in enumerate(free) if i not in picked_set]
    return tuple(labels)


def canonicalize(config: GroupConfig, assignment: Sequence[int]) -> tuple[int, ...]:
    """Validate ``assignment`` and map it to its canonical representative."""
    a = tuple(int(g) for g in assignment)
    if len(a) != config.n:
        raise ExactPermError(f"assignment has length {len(a)}, expected {config.n}")
    counts = [0] * config.k
    for g in a:
        if not 0 <= g < config.k:
            raise ExactPermError(f"group index {g} outside [0, {config.k})")
        counts[g] += 1
    if tuple(counts) != config.sizes:
        raise ExactPermError(f"assignment group sizes {tuple(counts)} != {config.sizes}")
    if config.balanced_two_sided and a[0] != 0:
        a = tuple(1 - g for g in a)
    return a


def rank(config: GroupConfig, assignment: Sequence[int]) -> int:
    """Inverse of :func:`unrank`; two-sided inputs are canonicalized first."""
    _exact_count(config)
    a = canonicalize(config, assignment)
    free = list(range(config.n))
    r = 0
    for group, size in enumerate(config.sizes[:-1]):
        radix = math.comb(len(free), size)
        positions = [i for i, f in enumerate(free) if a[f] == group]
        r = r * radix + _rank_combination(positions, len(free))
        free = [f for f in free if a[f] != group]
    return r


def _iter_assignments(sizes: tuple[int, ...], free: tuple[int, ...], group: int, labels: list[int]):
    if len(sizes) == 1:
        for f in free:
            labels[f] = group
        yield tuple(labels)
        return
    for combo in itertools.combinations(range(len(free)), sizes[0]):
        chosen = set(combo)
        for i in combo:
            labels[free[i]] = group
        rest = tuple(f for i, f in enumerate(free) if i not in chosen)
        yield from _iter_assignments(sizes[1:], rest, group + 1, labels)


def iter_assignments(config: GroupConfig):
    """Yield every canonical assignment in rank order."""
    total = count_space(config).total
    gen = _iter_assignments(config.sizes, tuple(range(config.n)), 0, [0] * config.n)
    return itertools.islice(gen, total)


def assignment_table(config: GroupConfig) -> np.ndarray:
    """All canonical assignments as an ``(m_t + 1, n)`` int8 array.

    Row ``r`` equals ``unrank(config, r)``. Small tables are cached.
    """
    total = _exact_count(config)
    if total <= _TABLE_CACHE_LIMIT:
        return _cached_table(config)
    return _build_table(config, total)


_TABLE_CACHE_LIMIT = 1 << 16


def _build_table(config: GroupConfig, total: int) -> np.ndarray:
    table = np.fromiter(
        itertools.chain.from_iterable(iter_assignments(config)),
        dtype=np.int8,
        count=total * config.n,
    ).reshape(total, config.n)
    table.flags.writeable = False
    return table


@lru_cache(maxsize=64)
def _cached_table(config: GroupConfig) -> np.ndarray:
    return _build_table(config, count_space(config).total)
