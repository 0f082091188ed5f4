"""
Statistics for result tables - median/std, rank-sum test and method ranks
"""

import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm, rankdata

from app.utils.errors import UsageError

# Pooled sample sizes up to this use the exact permutation distribution
EXACT_MAX_POOLED = 12

BETTER = "+"
WORSE = "-"
TIE = "="


@dataclass(frozen=True)
class RankSumResult:
    u: float
    p_value: float
    verdict: str


def _finite_or_inf(values: Sequence[float]) -> np.ndarray:
    """NaN sorts as the worst possible error"""
    array = np.asarray(values, dtype=float)
    return np.where(np.isnan(array), np.inf, array)


def median_and_std(values: Sequence[float]) -> Tuple[float, float]:
    """
    Median and sample standard deviation (n - 1 denominator)

    A single value has std 0. Non-finite inputs propagate into the result.
    """
    array = np.asarray(values, dtype=float)
    if array.size == 0:
        raise UsageError("median_and_std needs at least one value")
    with np.errstate(invalid="ignore", over="ignore"):
        median = float(np.median(array))
        std = float(np.std(array, ddof=1)) if array.size > 1 else 0.0
    return median, std


def _u_statistic(ranks_a: np.ndarray) -> float:
    n_a = ranks_a.size
    return float(ranks_a.sum() - n_a * (n_a + 1) / 2.0)


def _exact_p(ranks: np.ndarray, n_a: int, u_obs: float) -> float:
    """Two-sided p by enumerating every assignment of the pooled ranks to sample a"""
    n_b = ranks.size - n_a
    center = n_a * n_b / 2.0
    observed = abs(u_obs - center) - 1e-9
    extreme = 0
    total = 0
    for chosen in itertools.combinations(range(ranks.size), n_a):
        u = _u_statistic(ranks[list(chosen)])
        if abs(u - center) >= observed:
            extreme += 1
        total += 1
    return extreme / total


def _normal_p(ranks: np.ndarray, n_a: int, u_obs: float) -> float:
    """Normal approximation with tie and continuity corrections"""
    n = ranks.size
    n_b = n - n_a
    _, counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(counts ** 3 - counts)) / (n * (n - 1))
    variance = n_a * n_b / 12.0 * ((n + 1) - tie_term)
    if variance <= 0:
        return 1.0
    z = (abs(u_obs - n_a * n_b / 2.0) - 0.5) / math.sqrt(variance)
    return float(min(1.0, 2.0 * norm.sf(max(z, 0.0))))


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float], alpha: float = 0.05,
                      exact: Optional[bool] = None) -> RankSumResult:
    """
    Mann-Whitney rank-sum test of sample `a` against sample `b`

    Args:
        a: Errors of the method under test
        b: Errors of the comparison method
        alpha: Significance level
        exact: Force the exact (True) or normal (False) path; by default exact
            when the pooled size is at most EXACT_MAX_POOLED

    Returns:
        U of sample a, two-sided p and verdict: '+' when a is significantly
        lower, '-' when significantly higher, '=' otherwise
    """
    a = _finite_or_inf(a)
    b = _finite_or_inf(b)
    if a.size < 3 or b.size < 3:
        raise UsageError(f"rank-sum test needs at least 3 values per sample, got {a.size} and {b.size}")

    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    n_a, n_b = a.size, b.size
    u = _u_statistic(ranks[:n_a])

    if np.all(pooled == pooled[0]):
        return RankSumResult(u, 1.0, TIE)

    use_exact = pooled.size <= EXACT_MAX_POOLED if exact is None else exact
    p_value = _exact_p(ranks, n_a, u) if use_exact else _normal_p(ranks, n_a, u)

    if p_value < alpha:
        verdict = BETTER if u < n_a * n_b / 2.0 else WORSE
    else:
        verdict = TIE
    return RankSumResult(u, p_value, verdict)


def rank_values(values: Sequence[float]) -> List[int]:
    """Rank 1 for the lowest value; ties share the lower rank"""
    return [int(r) for r in rankdata(_finite_or_inf(values), method="min")]


def rank_table(medians: Mapping[str, Mapping[str, float]]) -> Tuple[Dict[str, Dict[str, int]], Dict[str, float]]:
    """
    Rank methods per benchmark by median error

    Args:
        medians: method -> benchmark -> median

    Returns:
        (benchmark -> method -> rank, method -> average rank over benchmarks)
    """
    methods = list(medians)
    benchmarks: List[str] = []
    for method in methods:
        for benchmark in medians[method]:
            if benchmark not in benchmarks:
                benchmarks.append(benchmark)

    ranks: Dict[str, Dict[str, int]] = {}
    for benchmark in benchmarks:
        present = [m for m in methods if benchmark in medians[m]]
        ranks[benchmark] = dict(zip(present, rank_values([medians[m][benchmark] for m in present])))

    average: Dict[str, float] = {}
    for method in methods:
        own = [ranks[b][method] for b in benchmarks if method in ranks[b]]
        average[method] = float(np.mean(own)) if own else math.nan
    return ranks, average
