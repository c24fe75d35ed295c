"""
Statistical helpers used by the validation suites
"""
import numpy as np
import pytest

from src.evaluation.metrics import (
    batch_means_stderr,
    chi_square_geometric_fit,
    chi_square_independence,
    empirical_law,
    lag1_autocorrelation,
    standard_error,
    total_variation,
    two_sample_chi_square,
    z_score,
)


@pytest.fixture
def generator():
    return np.random.default_rng(20240101)


def test_total_variation_and_empirical_law():
    np.testing.assert_allclose(empirical_law([0, 2, 2, 3], 5), [0.25, 0, 0.5, 0.25, 0])
    assert total_variation([1, 0], [0, 1]) == 1.0
    assert total_variation([0.5, 0.5], [0.5, 0.5]) == 0.0


def test_geometric_fit_accepts_geometric_samples(generator):
    _, pvalue = chi_square_geometric_fit(generator.geometric(0.05, size=20_000), 0.05)
    assert pvalue > 1e-3


def test_geometric_fit_rejects_wrong_parameter(generator):
    _, pvalue = chi_square_geometric_fit(generator.geometric(0.05, size=20_000), 0.06)
    assert pvalue < 1e-6


def test_geometric_fit_with_large_success_probability(generator):
    _, pvalue = chi_square_geometric_fit(generator.geometric(0.7, size=5000), 0.7)
    assert pvalue > 1e-3


def test_independence(generator):
    a = generator.integers(0, 4, size=10_000)
    b = generator.integers(0, 3, size=10_000)
    assert chi_square_independence(a, b)[1] > 1e-3
    assert chi_square_independence(a, (a + (generator.random(10_000) < 0.2)) % 4)[1] < 1e-6


def test_independence_pools_rare_categories():
    a = np.array([0] * 50 + [1] * 50 + [7, 8])
    b = np.array([0, 1] * 51)
    statistic, pvalue = chi_square_independence(a, b)
    assert np.isfinite(statistic)
    assert 0.0 <= pvalue <= 1.0


def test_independence_of_constant_sample():
    assert chi_square_independence(np.zeros(100), np.arange(100) % 3) == (0.0, 1.0)


def test_two_sample(generator):
    same = two_sample_chi_square(generator.integers(0, 5, 5000), generator.integers(0, 5, 5000))[1]
    shifted = two_sample_chi_square(generator.integers(0, 5, 5000), generator.integers(1, 6, 5000))[1]
    assert same > 1e-3
    assert shifted < 1e-6


def test_lag1_autocorrelation(generator):
    assert abs(lag1_autocorrelation(generator.random(100_000))) < 0.02
    ar = np.zeros(100_000)
    noise = generator.standard_normal(100_000)
    for i in range(1, len(ar)):
        ar[i] = 0.9 * ar[i - 1] + noise[i]
    assert lag1_autocorrelation(ar) == pytest.approx(0.9, abs=0.01)
    assert lag1_autocorrelation(np.ones(10)) == 0.0


def test_standard_errors(generator):
    assert standard_error([3.0]) == 0.0
    assert standard_error([1.0, 3.0]) == pytest.approx(1.0)
    iid = generator.standard_normal(100_000)
    assert batch_means_stderr(iid) == pytest.approx(standard_error(iid), rel=0.5)
    assert batch_means_stderr([1.0, 2.0, 3.0]) == standard_error([1.0, 2.0, 3.0])


def test_z_score():
    assert z_score(0.0, 0.0) == 0.0
    assert z_score(0.0, 1.0) == 0.0
    assert z_score(2.0, 0.5) == 4.0
    assert z_score(-1.0, 0.0) == -np.inf
