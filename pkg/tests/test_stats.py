import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import mannwhitneyu

from app.services.stats import (
    BETTER, TIE, WORSE, median_and_std, rank_table, rank_values, wilcoxon_rank_sum
)
from app.utils.errors import UsageError


def test_median_and_std():
    median, std = median_and_std([2, 4, 4, 4, 5, 5, 7, 9])
    assert median == 4.5
    assert std == pytest.approx(2.138, abs=1e-3)
    assert median_and_std([3.0]) == (3.0, 0.0)
    with pytest.raises(UsageError):
        median_and_std([])


def test_median_and_std_propagate_infinity():
    median, std = median_and_std([1.0, math.inf, math.inf])
    assert median == math.inf
    assert math.isnan(std)


def test_rank_sum_small_separated_samples_are_not_significant():
    result = wilcoxon_rank_sum([1, 2, 3], [4, 5, 6])
    assert result.u == 0
    assert result.p_value == pytest.approx(0.1)
    assert result.verdict == TIE


def test_rank_sum_verdict_orientation():
    low, high = list(range(1, 7)), list(range(101, 107))
    better = wilcoxon_rank_sum(low, high)
    assert better.p_value == pytest.approx(2 / 924)
    assert better.verdict == BETTER
    worse = wilcoxon_rank_sum(high, low)
    assert worse.u == 36
    assert worse.verdict == WORSE


def test_rank_sum_identical_samples():
    result = wilcoxon_rank_sum([1.0] * 5, [1.0] * 5)
    assert result.p_value == 1.0
    assert result.verdict == TIE


def test_rank_sum_needs_three_values():
    with pytest.raises(UsageError):
        wilcoxon_rank_sum([1, 2], [3, 4, 5])


def test_rank_sum_treats_nan_as_worst():
    result = wilcoxon_rank_sum([1, 2, 3, 4, 5, 6], [float("nan")] * 6)
    assert result.verdict == BETTER


def test_exact_p_with_midranks():
    result = wilcoxon_rank_sum([1, 2, 3], [2, 4, 5], exact=True)
    assert result.u == 1.5
    assert 0 < result.p_value <= 1


def test_exact_and_normal_agree_at_boundary():
    rng = np.random.default_rng(0)
    for _ in range(100):
        a, b = rng.normal(size=6), rng.normal(0.5, 1.0, size=6)
        exact = wilcoxon_rank_sum(a, b, exact=True).p_value
        normal = wilcoxon_rank_sum(a, b, exact=False).p_value
        assert abs(exact - normal) < 0.02


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_a=st.integers(3, 7), n_b=st.integers(3, 5))
def test_exact_p_matches_scipy(seed, n_a, n_b):
    values = np.random.default_rng(seed).permutation(100)[:n_a + n_b].astype(float)
    a, b = values[:n_a], values[n_a:]
    ours = wilcoxon_rank_sum(a, b)
    reference = mannwhitneyu(a, b, alternative="two-sided", method="exact")
    assert ours.u == reference.statistic
    assert ours.p_value == pytest.approx(reference.pvalue, rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_normal_p_matches_scipy_with_ties(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.integers(0, 10, size=15).astype(float), rng.integers(2, 12, size=12).astype(float)
    ours = wilcoxon_rank_sum(a, b)
    reference = mannwhitneyu(a, b, alternative="two-sided", method="asymptotic", use_continuity=True)
    assert ours.p_value == pytest.approx(reference.pvalue, rel=1e-9, abs=1e-12)


def test_rank_values():
    assert rank_values([3, 1, 2]) == [3, 1, 2]
    assert rank_values([5, 5, 5]) == [1, 1, 1]
    assert rank_values([2, 1, 2]) == [2, 1, 2]
    assert rank_values([math.nan, 1, math.inf]) == [2, 1, 2]


def test_rank_table_reference_row():
    medians = {
        "GEP": {"Nguyen7": 2.63e-01},
        "ABCEP": {"Nguyen7": 3.92e-02},
        "GA-NEEP": {"Nguyen7": 3.30e-02},
        "PSO-NEEP": {"Nguyen7": 2.19e-03},
        "CMAES-NEEP": {"Nguyen7": 1.15e-03},
    }
    ranks, average = rank_table(medians)
    assert [ranks["Nguyen7"][m] for m in medians] == [5, 4, 3, 2, 1]
    assert average["CMAES-NEEP"] == 1.0


def test_rank_table_averages_over_benchmarks():
    ranks, average = rank_table({
        "a": {"p": 1.0, "q": 3.0},
        "b": {"p": 2.0, "q": 1.0},
        "c": {"p": 2.0},
    })
    assert ranks == {"p": {"a": 1, "b": 2, "c": 2}, "q": {"a": 2, "b": 1}}
    assert average == {"a": 1.5, "b": 1.5, "c": 2.0}
