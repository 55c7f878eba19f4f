import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from covregret.prob import (
    CostDistribution,
    NotPositiveDefinite,
    cholesky_factor,
    derive_seed,
    random_pd_matrix,
    sample_costs,
    substream_seed,
)


def test_cholesky_identity():
    np.testing.assert_array_equal(cholesky_factor(np.eye(3)), np.eye(3))


def test_cholesky_hand_example():
    L = cholesky_factor([[4.0, 2.0], [2.0, 3.0]])
    np.testing.assert_allclose(L, [[2.0, 0.0], [1.0, np.sqrt(2.0)]], atol=1e-15)


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        cholesky_factor([[1.0, 2.0], [2.0, 1.0]])


def test_cholesky_rejects_asymmetric():
    with pytest.raises(ValueError):
        cholesky_factor([[1.0, 0.5], [0.0, 1.0]])


def test_degenerate_distribution_rejected():
    with pytest.raises(NotPositiveDefinite):
        CostDistribution([5.0], [[0.0]])


@pytest.mark.parametrize("d", [1, 2, 5, 20, 100])
def test_factor_round_trip(d):
    S = random_pd_matrix(d, seed=d, scale=3.0)
    L = cholesky_factor(S)
    assert np.allclose(L, np.tril(L))
    assert np.all(np.diag(L) > 0)
    assert np.linalg.norm(L @ L.T - S) / np.linalg.norm(S) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 12), seed=st.integers(0, 2**32), scale=st.floats(1e-3, 1e3))
def test_random_pd_eigen_floor(d, seed, scale):
    S = random_pd_matrix(d, seed, scale)
    assert np.array_equal(S, S.T)
    assert np.linalg.eigvalsh(S).min() >= 0.1 * scale - 1e-9 * max(1.0, scale)
    cholesky_factor(S)


def test_random_pd_scalar_and_determinism():
    assert random_pd_matrix(1, 0)[0, 0] > 0
    np.testing.assert_array_equal(random_pd_matrix(5, 7), random_pd_matrix(5, 7))


def test_sampling_is_deterministic():
    dist = CostDistribution(np.zeros(3), random_pd_matrix(3, 1))
    np.testing.assert_array_equal(sample_costs(dist, 50, 9), sample_costs(dist, 50, 9))
    assert not np.array_equal(sample_costs(dist, 50, 9), sample_costs(dist, 50, 10))


def test_sampling_moments():
    n = 40000
    X = sample_costs(CostDistribution(np.zeros(4), np.eye(4)), n, 3)
    assert np.abs(X.mean(axis=0)).max() <= 5 / np.sqrt(n)
    assert np.abs(np.cov(X.T, bias=True) - np.eye(4)).max() <= 5 / np.sqrt(n)


def test_sample_covariance_converges():
    S = random_pd_matrix(4, 11)
    dist = CostDistribution(np.ones(4), S)
    med = []
    for n in (100, 1000, 10000):
        errs = [np.linalg.norm(np.cov(sample_costs(dist, n, s).T, bias=True) - S) for s in range(20)]
        med.append(np.median(errs))
    assert med[0] > med[1] > med[2]


def test_sample_costs_needs_rows():
    with pytest.raises(ValueError):
        sample_costs(CostDistribution([0.0], [[1.0]]), 0, 1)


def test_seed_derivation():
    assert derive_seed(5, 3) == 5 ^ 3
    assert len({substream_seed(s, t) for s in range(10) for t in range(10)}) == 100
