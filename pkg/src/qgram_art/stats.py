"""Wilcoxon rank-sum test, Vargha-Delaney A12 and relative standard error."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

__all__ = [
    "TestResult",
    "EffectSize",
    "wilcoxon_rank_sum",
    "vargha_delaney",
    "relative_standard_error",
    "A12_THRESHOLDS",
]

# |A12 - 0.5| boundaries for small / medium / large (Vargha & Delaney 2000)
A12_THRESHOLDS = (0.06, 0.14, 0.21)


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    p_value: float
    statistic: float
    method: str = "exact"


@dataclass(frozen=True)
class EffectSize:
    a12: float
    magnitude: str


def _ranks(values: Sequence[float]) -> tuple[list[float], list[int]]:
    """Mid-ranks (1-based) and the sizes of tied groups."""
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    ties = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        ties.append(j - i + 1)
        i = j + 1
    return ranks, ties


@lru_cache(maxsize=256)
def _u_distribution(m: int, n: int) -> tuple[int, ...]:
    """Number of arrangements giving each value of U, for sizes m and n without ties."""
    # f[i][j][u]: arrangements of i x-values and j y-values with U = u,
    # built by deciding whether the largest element is an x or a y
    prev = [[1]] + [[1] for _ in range(n)]  # i = 0: U is always 0
    for i in range(1, m + 1):
        cur = [[1]]  # j = 0
        for j in range(1, n + 1):
            # largest is x: it beats all j y's -> shift by j; largest is y: no shift
            a = prev[j]
            b = cur[j - 1]
            size = i * j + 1
            row = [0] * size
            for u, c in enumerate(a):
                row[u + j] += c
            for u, c in enumerate(b):
                row[u] += c
            cur.append(row)
        prev = cur
    return tuple(prev[n])


def wilcoxon_rank_sum(x: Sequence[float], y: Sequence[float], method: str = "auto") -> TestResult:
    """Two-sided Wilcoxon rank-sum (Mann-Whitney U) test.

    ``method="auto"`` uses the exact null distribution when the smaller sample
    has at most 8 values and there are no ties, and the normal approximation
    with tie and continuity correction otherwise.  The reported statistic is
    U for ``x``.
    """
    m, n = len(x), len(y)
    if m == 0 or n == 0:
        raise ValueError("both samples must be non-empty")
    ranks, ties = _ranks(list(x) + list(y))
    r1 = math.fsum(ranks[:m])
    u = r1 - m * (m + 1) / 2
    has_ties = any(t > 1 for t in ties)
    if method == "auto":
        method = "exact" if min(m, n) <= 8 and not has_ties else "asymptotic"
    if method == "exact":
        if has_ties:
            raise ValueError("exact distribution assumes no ties")
        dist = _u_distribution(m, n)
        total = sum(dist)
        k = int(round(u))
        lower = sum(dist[: k + 1]) / total
        upper = sum(dist[k:]) / total
        p = min(1.0, 2.0 * min(lower, upper))
        return TestResult(p, u, "exact")
    if method != "asymptotic":
        raise ValueError(f"unknown method {method!r}")
    mu = m * n / 2
    N = m + n
    tie_term = sum(t ** 3 - t for t in ties)
    var = m * n / 12 * ((N + 1) - tie_term / (N * (N - 1)))
    if var <= 0:
        return TestResult(1.0, u, "asymptotic")
    z = (abs(u - mu) - 0.5) / math.sqrt(var)
    if z <= 0:
        return TestResult(1.0, u, "asymptotic")
    p = math.erfc(z / math.sqrt(2))
    return TestResult(min(1.0, p), u, "asymptotic")


def vargha_delaney(x: Sequence[float], y: Sequence[float]) -> EffectSize:
    """Probability that a value drawn from ``x`` exceeds one drawn from ``y``
    (ties count one half)."""
    if not x or not y:
        raise ValueError("both samples must be non-empty")
    wins = 0
    ties = 0
    for a in x:
        for b in y:
            if a > b:
                wins += 1
            elif a == b:
                ties += 1
    a12 = (wins + 0.5 * ties) / (len(x) * len(y))
    return EffectSize(a12, _magnitude(a12))


def _magnitude(a12: float) -> str:
    d = abs(a12 - 0.5)
    small, medium, large = A12_THRESHOLDS
    if d < small:
        return "negligible"
    if d < medium:
        return "small"
    if d < large:
        return "medium"
    return "large"


def relative_standard_error(sample: Sequence[float]) -> float:
    """Standard error of the mean divided by the absolute mean."""
    if len(sample) < 2:
        raise ValueError("need at least two values")
    mean = statistics.fmean(sample)
    if mean == 0:
        raise ValueError("relative standard error is undefined for a zero mean")
    return statistics.stdev(sample) / math.sqrt(len(sample)) / abs(mean)
