"""
Tests for the validation indexes.
"""

import math

import numpy as np
import pytest
from scipy.spatial.distance import pdist, squareform

from nullboot.data import DissimilarityMatrix, Partition, PointCloud, ValidationError
from nullboot.mixture import GmmFit, gmm_noise_fit
from nullboot.validation import (
    PredictionStrengthConfig,
    adjusted_bic_profile,
    asw,
    bic,
    largest_stable_k,
    prediction_strength,
    prediction_strength_profile,
)


def line(points):
    return DissimilarityMatrix(squareform(pdist(np.asarray(points, dtype=float)[:, None])))


def silhouette_oracle(d, labels):
    """Direct per-object silhouette evaluation."""
    values = []
    for i in range(len(labels)):
        own = [j for j in range(len(labels)) if labels[j] == labels[i] and j != i]
        if not own:
            values.append(0.0)
            continue
        a = sum(d[i, j] for j in own) / len(own)
        b = min(
            sum(d[i, j] for j in range(len(labels)) if labels[j] == c) / sum(1 for x in labels if x == c)
            for c in set(labels) if c != labels[i]
        )
        values.append((b - a) / max(a, b) if max(a, b) > 0 else 0.0)
    return sum(values) / len(values)


def fake_fit(loglik, n_params, n):
    return GmmFit(k=1, weights=np.ones(1), means=np.zeros((1, 1)), covariances=np.ones((1, 1, 1)),
                  noise_density=0.0, loglik=loglik, n_params=n_params,
                  responsibilities=np.ones((n, 1)), n=n)


class TestASW:
    """Test average silhouette width."""

    def test_two_pairs(self):
        value = asw(line([0, 1, 10, 11]), Partition(np.array([1, 1, 2, 2]), k=2))
        assert value == pytest.approx(0.5 * (9.5 / 10.5) + 0.5 * (8.5 / 9.5), abs=1e-12)
        assert value == pytest.approx(0.8997, abs=1e-4)

    def test_two_singletons(self):
        assert asw(line([0, 5]), Partition(np.array([1, 2]), k=2)) == 0.0

    def test_duplicates_far_apart(self):
        value = asw(line([0, 0, 0, 100, 100]), Partition(np.array([1, 1, 1, 2, 2]), k=2))
        assert value == pytest.approx(1.0)

    def test_noise_excluded(self):
        with_noise = asw(line([0, 1, 10, 11, 50]), Partition(np.array([1, 1, 2, 2, 0]), k=2))
        without = asw(line([0, 1, 10, 11]), Partition(np.array([1, 1, 2, 2]), k=2))
        assert with_noise == pytest.approx(without, abs=1e-12)

    def test_needs_two_clusters(self):
        with pytest.raises(ValidationError, match='k >= 2'):
            asw(line([0, 1]), Partition(np.array([1, 1]), k=1))

    def test_matches_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            n = int(rng.integers(6, 51))
            k = int(rng.integers(2, 6))
            d = squareform(pdist(rng.normal(size=(n, 3))))
            labels = np.concatenate([np.arange(1, k + 1), rng.integers(1, k + 1, n - k)])
            rng.shuffle(labels)
            value = asw(DissimilarityMatrix(d), Partition(labels, k=k))
            assert value == pytest.approx(silhouette_oracle(d, labels.tolist()), abs=1e-12)
            assert -1.0 <= value <= 1.0

    def test_scale_invariance(self):
        rng = np.random.default_rng(3)
        d = squareform(pdist(rng.normal(size=(20, 2))))
        part = Partition(np.repeat([1, 2], 10), k=2)
        assert asw(DissimilarityMatrix(d), part) == pytest.approx(asw(DissimilarityMatrix(7.5 * d), part), abs=1e-12)


class TestPredictionStrength:
    """Test prediction strength."""

    def blobs(self, n=40, seed=0):
        rng = np.random.default_rng(seed)
        return np.vstack([rng.normal(size=(n // 2, 2)), rng.normal(size=(n // 2, 2)) + 50.0])

    @pytest.mark.parametrize('method', ['pam', 'average', 'complete'])
    def test_separated_blobs(self, method):
        cfg = PredictionStrengthConfig(b=10, method=method, seed=1)
        assert prediction_strength(self.blobs(), 2, cfg) == pytest.approx(1.0)

    def test_uniform_decreasing(self):
        points = PointCloud(np.random.default_rng(4).uniform(size=(100, 1)))
        profile = prediction_strength_profile(points, [2, 5], PredictionStrengthConfig(b=20, seed=2))
        assert profile[2] < 1.0 + 1e-12
        assert profile[2] > profile[5]

    def test_range_and_determinism(self):
        D = DissimilarityMatrix(squareform(pdist(np.random.default_rng(6).normal(size=(30, 2)))))
        cfg = PredictionStrengthConfig(b=5, method='average', seed=8)
        first = prediction_strength_profile(D, range(2, 6), cfg)
        second = prediction_strength_profile(D, range(2, 6), cfg)
        assert first == second
        assert all(0.0 <= v <= 1.0 for v in first.values())

    def test_profile_shares_splits(self):
        D = DissimilarityMatrix(squareform(pdist(np.random.default_rng(6).normal(size=(30, 2)))))
        cfg = PredictionStrengthConfig(b=4, seed=3)
        profile = prediction_strength_profile(D, [2, 3], cfg)
        assert prediction_strength(D, 3, cfg) == pytest.approx(profile[3], abs=1e-15)

    def test_k_range(self):
        with pytest.raises(ValidationError, match='2 <= k'):
            prediction_strength(np.arange(10.0)[:, None], 6)

    def test_too_small(self):
        with pytest.raises(ValidationError, match='n >= 4'):
            prediction_strength(np.arange(3.0)[:, None], 2)

    def test_invalid_config(self):
        with pytest.raises(ValidationError, match='b must be >= 1'):
            PredictionStrengthConfig(b=0)
        with pytest.raises(ValidationError, match='Invalid prediction strength method'):
            PredictionStrengthConfig(method='single')

    def test_largest_stable_k(self):
        assert largest_stable_k({2: 0.95, 3: 0.85, 4: 0.6, 5: 0.81}) == 5
        assert largest_stable_k({2: 0.5}) is None


class TestBIC:
    """Test BIC and the adjusted BIC profile."""

    def test_formula(self):
        fit = fake_fit(-150.0, 2, 100)
        assert bic(fit) == pytest.approx(-300.0 - 2 * math.log(100))

    def test_doubling_n(self):
        fit = fake_fit(-150.0, 5, 100)
        assert bic(fit, 100) - bic(fit, 200) == pytest.approx(5 * math.log(2))

    def test_fitted_formula(self):
        Y = np.random.default_rng(0).normal(size=(80, 2))
        fit = gmm_noise_fit(Y, 2, with_noise=True, restarts=2, seed=0)
        assert bic(fit) == 2 * fit.loglik - fit.n_params * math.log(80)

    def test_single_gaussian_preferred(self):
        Y = np.random.default_rng(12).normal(size=(400, 1))
        one = bic(gmm_noise_fit(Y, 1, restarts=1))
        two = bic(gmm_noise_fit(Y, 2, restarts=3, seed=0))
        assert one > two

    def test_adjusted(self):
        profile = adjusted_bic_profile({1: -100.0, 3: -80.0}, signed=True)
        assert profile[3] == pytest.approx(-0.2)
        assert profile[1] == 0.0

    def test_adjusted_oriented(self):
        profile = adjusted_bic_profile({1: -100.0, 3: -80.0})
        assert profile[3] == pytest.approx(0.2)

    def test_constant_profile(self):
        assert adjusted_bic_profile({1: -5.0, 2: -5.0, 3: -5.0}) == {1: 0.0, 2: 0.0, 3: 0.0}

    def test_zero_base(self):
        with pytest.raises(ValidationError, match='BIC\\(1\\) = 0'):
            adjusted_bic_profile({1: 0.0, 2: 3.0})

    def test_missing_base(self):
        with pytest.raises(ValidationError, match='k=1'):
            adjusted_bic_profile({2: 3.0})
