"""
Statistical metrics for sampler validation and estimate error bars
"""
from typing import Tuple

import numpy as np
from scipy import stats

MAX_FIT_BINS = 50


def empirical_law(samples: np.ndarray, n_states: int) -> np.ndarray:
    """
    Empirical distribution of state indices

    Args:
        samples: State indices
        n_states: Size of the state space

    Returns:
        Frequency vector of length n_states
    """
    counts = np.bincount(np.asarray(samples, dtype=np.int64), minlength=n_states)
    return counts / counts.sum()


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    """Half the L1 distance between two probability vectors"""
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def _pool_rare(labels: np.ndarray, min_count: int) -> np.ndarray:
    """Relabel categories with fewer than min_count hits into one pooled category"""
    values, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    rare = counts < min_count
    if rare.sum() <= 1:
        return inverse
    codes = np.cumsum(~rare) - 1
    codes[rare] = (~rare).sum()
    return codes[inverse]


def chi_square_geometric_fit(samples: np.ndarray, p: float, min_expected: float = 5.0) -> Tuple[float, float]:
    """
    Goodness of fit of positive integer samples to Geometric(p) on {1, 2, ...}

    Bins are (nearly) equiprobable intervals between geometric quantiles, each
    expecting at least `min_expected` hits. The parameter is known, so no
    degree of freedom is removed.

    Args:
        samples: Observed exit times
        p: Success probability
        min_expected: Minimum expected count per bin

    Returns:
        (chi-square statistic, p-value)
    """
    samples = np.asarray(samples, dtype=np.int64)
    n = len(samples)
    n_bins = int(max(2, min(MAX_FIT_BINS, n // min_expected)))
    inner = np.unique(stats.geom.ppf(np.arange(1, n_bins) / n_bins, p).astype(np.int64))
    edges = np.concatenate([[0], inner, [np.iinfo(np.int64).max]])

    # Bin i holds samples in (edges[i], edges[i + 1]]
    bins = np.searchsorted(edges, samples, side='left') - 1
    observed = np.bincount(bins, minlength=len(edges) - 1)
    cdf = np.concatenate([[0.0], stats.geom.cdf(inner, p), [1.0]])
    expected = n * np.diff(cdf)
    result = stats.chisquare(observed, expected)
    return float(result.statistic), float(result.pvalue)


def chi_square_independence(a: np.ndarray, b: np.ndarray, min_count: int = 5) -> Tuple[float, float]:
    """
    Chi-square test of independence between two categorical samples

    Categories seen fewer than `min_count` times are pooled.

    Returns:
        (chi-square statistic, p-value)
    """
    a_codes = _pool_rare(np.asarray(a), min_count)
    b_codes = _pool_rare(np.asarray(b), min_count)
    table = np.zeros((a_codes.max() + 1, b_codes.max() + 1))
    np.add.at(table, (a_codes, b_codes), 1)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    if min(table.shape) < 2:
        return 0.0, 1.0
    statistic, pvalue, _, _ = stats.chi2_contingency(table)
    return float(statistic), float(pvalue)


def two_sample_chi_square(a: np.ndarray, b: np.ndarray, min_count: int = 5) -> Tuple[float, float]:
    """
    Two-sample test that two categorical samples share one law

    Returns:
        (chi-square statistic, p-value)
    """
    a = np.asarray(a)
    b = np.asarray(b)
    labels = np.concatenate([a, b])
    sample = np.concatenate([np.zeros(len(a), dtype=np.int64), np.ones(len(b), dtype=np.int64)])
    return chi_square_independence(sample, labels, min_count=min_count)


def lag1_autocorrelation(x: np.ndarray) -> float:
    """Sample lag-1 autocorrelation"""
    x = np.asarray(x, dtype=np.float64)
    centered = x - x.mean()
    denominator = np.dot(centered, centered)
    if denominator == 0:
        return 0.0
    return float(np.dot(centered[:-1], centered[1:]) / denominator)


def standard_error(x: np.ndarray) -> float:
    """Standard error of the mean of independent values"""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 2:
        return 0.0
    return float(x.std(ddof=1) / np.sqrt(len(x)))


def batch_means_stderr(x: np.ndarray, n_batches: int = 20) -> float:
    """
    Standard error of the mean of a correlated series by non-overlapping batch means

    Args:
        x: Time series
        n_batches: Number of equal batches (trailing remainder dropped)

    Returns:
        Estimated standard error
    """
    x = np.asarray(x, dtype=np.float64)
    size = len(x) // n_batches
    if size == 0:
        return standard_error(x)
    means = x[:size * n_batches].reshape(n_batches, size).mean(axis=1)
    return standard_error(means)


def z_score(bias: float, stderr: float) -> float:
    """bias / stderr, zero when there is no bias"""
    if bias == 0:
        return 0.0
    if stderr == 0:
        return float(np.copysign(np.inf, bias))
    return bias / stderr
