"""
Tests for the latent Gaussian null model.
"""

import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.stats import norm

from nullboot.data import MixedDataset, NullbootWarning, ValidationError, VariableSpec
from nullboot.latent import (
    LatentGaussianParams,
    _count_modes,
    estimate_latent_gaussian,
    fit_continuous_marginal,
    nearest_correlation,
    nominal_ordering,
    sample_latent_gaussian,
    summarize_latent,
    unimodal_density_fit,
)


SIGMA = np.array([[1.0, 0.5, 0.0], [0.5, 1.0, -0.5], [0.0, -0.5, 1.0]])
RISK = VariableSpec('risk', 'ordinal', levels=('low', 'mid', 'high', 'top'))
OWNER = VariableSpec('owner', 'binary', levels=('no', 'yes'))
INCOME = VariableSpec('income', 'continuous')


def latent_dataset(n, sigma=SIGMA, seed=0):
    """Mixed data generated from a latent normal vector with known correlation."""
    rng = np.random.default_rng(seed)
    z = rng.multivariate_normal(np.zeros(3), sigma, size=n)
    income = np.exp(z[:, 0])
    risk = np.searchsorted(norm.ppf([0.2, 0.5, 0.8]), z[:, 1])
    owner = (z[:, 2] > 0.3).astype(float)
    return MixedDataset([INCOME, RISK, OWNER], np.column_stack([income, risk, owner]))


class TestNominalOrdering:
    """Test the latent ordering of nominal levels."""

    def grouped(self):
        x = np.arange(30.0)
        level = np.where(x < 10, 1, np.where(x < 20, 2, 0))
        specs = [VariableSpec('x', 'continuous'), VariableSpec('kind', 'nominal', levels=('a', 'b', 'c'))]
        return MixedDataset(specs, np.column_stack([x, level]))

    def test_sorted_by_average_correlation(self):
        assert nominal_ordering(self.grouped(), 1) == (1, 2, 0)

    def test_binary_nominal(self):
        x = np.arange(10.0)
        specs = [VariableSpec('x', 'continuous'), VariableSpec('side', 'nominal', levels=('up', 'down'))]
        data = MixedDataset(specs, np.column_stack([x, (x < 5).astype(float)]))
        assert nominal_ordering(data, 1) == (1, 0)

    def test_ties_keep_level_order(self):
        spec = VariableSpec('kind', 'nominal', levels=('a', 'b', 'c'))
        data = MixedDataset([spec], np.array([[0.0], [1.0], [2.0], [1.0]]))
        assert nominal_ordering(data, 0) == (0, 1, 2)

    def test_absent_level_last(self):
        x = np.arange(10.0)
        specs = [VariableSpec('x', 'continuous'), VariableSpec('kind', 'nominal', levels=('a', 'b', 'c'))]
        data = MixedDataset(specs, np.column_stack([x, (x < 5).astype(float) * 2]))
        with pytest.warns(NullbootWarning, match='constant dummies'):
            order = nominal_ordering(data, 1)
        assert order == (2, 0, 1)

    def test_not_nominal(self):
        with pytest.raises(ValidationError, match='not nominal'):
            nominal_ordering(self.grouped(), 0)


class TestUnimodalDensity:
    """Test the unimodal kernel density fit."""

    def test_normal_needs_no_widening(self):
        values = norm.ppf((np.arange(1000) + 0.5) / 1000)
        density = unimodal_density_fit(values)
        assert density.steps == 0
        assert density.bandwidth == density.initial_bandwidth

    def test_bimodal_is_widened(self):
        rng = np.random.default_rng(1)
        values = np.concatenate([rng.normal(0.0, 1.0, 200), rng.normal(8.0, 1.0, 200)])
        density = unimodal_density_fit(values)
        assert density.steps > 0
        assert _count_modes(density.pdf) == 1

    def test_normalised(self):
        density = unimodal_density_fit(np.random.default_rng(2).gamma(2.0, 1.0, 300))
        assert trapezoid(density.pdf, density.grid) == pytest.approx(1.0, abs=1e-6)
        assert density.cdf[-1] == pytest.approx(1.0)
        assert len(density.grid) == 512

    def test_insufficient_data(self):
        with pytest.raises(ValidationError, match='insufficient data'):
            unimodal_density_fit(np.arange(9.0))

    def test_floor_truncates_grid(self):
        values = np.random.default_rng(3).exponential(size=100) + 1.0
        density = unimodal_density_fit(values, floor=1.0)
        assert density.grid[0] == 1.0


class TestContinuousMarginal:
    """Test the point mass plus density marginal."""

    def test_point_mass(self):
        values = np.concatenate([np.zeros(30), np.random.default_rng(4).gamma(2.0, 1.0, 70)])
        marginal = fit_continuous_marginal(values)
        assert marginal.floor == 0.0
        assert marginal.p_floor == pytest.approx(0.3)
        assert np.all(marginal.ppf(np.array([0.1, 0.29])) == 0.0)
        assert np.all(marginal.ppf(np.array([0.5, 0.9])) > 0.0)

    def test_no_point_mass_for_unique_minimum(self):
        marginal = fit_continuous_marginal(np.random.default_rng(5).normal(size=50))
        assert marginal.p_floor == 0.0


class TestEstimateLatentGaussian:
    """Test estimation of the latent Gaussian model."""

    def test_ordinal_thresholds(self):
        risk = VariableSpec('risk', 'ordinal', levels=('low', 'mid', 'high'))
        codes = np.repeat([0, 1, 2], [20, 30, 50])
        x = np.random.default_rng(6).normal(size=100)
        params = estimate_latent_gaussian(MixedDataset([INCOME, risk], np.column_stack([x, codes])))
        np.testing.assert_allclose(params.thresholds[1], [norm.ppf(0.2), norm.ppf(0.5)])
        assert params.thresholds[0] is None

    def test_recovers_sigma(self):
        params = estimate_latent_gaussian(latent_dataset(5000))
        np.testing.assert_allclose(params.sigma, SIGMA, atol=0.05)

    def test_independent_columns(self):
        params = estimate_latent_gaussian(latent_dataset(3000, sigma=np.eye(3), seed=1))
        np.testing.assert_allclose(params.sigma, np.eye(3), atol=0.05)

    def test_nominal_ordering_recorded(self):
        x = np.arange(60.0)
        kind = VariableSpec('kind', 'nominal', levels=('a', 'b', 'c'))
        data = MixedDataset([INCOME, kind], np.column_stack([x, np.where(x < 20, 1, np.where(x < 40, 2, 0))]))
        params = estimate_latent_gaussian(data)
        assert params.orderings['kind'] == (1, 2, 0)
        assert params.sigma[0, 1] > 0.9

    def test_cont_bins(self):
        with pytest.raises(ValidationError, match='cont_bins'):
            estimate_latent_gaussian(latent_dataset(100), cont_bins=1)


class TestNearestCorrelation:
    """Test the positive semi-definite repair."""

    def test_psd_untouched(self):
        projected, shift = nearest_correlation(SIGMA)
        np.testing.assert_array_equal(projected, SIGMA)
        assert shift == 0.0

    def test_projection(self):
        bad = np.array([[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]])
        projected, shift = nearest_correlation(bad)
        assert np.linalg.eigvalsh(projected).min() >= -1e-10
        np.testing.assert_allclose(np.diag(projected), 1.0)
        assert shift > 0.1


class TestSampleLatentGaussian:
    """Test sampling from the latent Gaussian model."""

    @pytest.fixture(scope='class')
    def params(self):
        return estimate_latent_gaussian(latent_dataset(2000, seed=2))

    def test_shape_and_schema(self, params):
        sample = sample_latent_gaussian(params, 50, seed=1)
        assert (sample.n, sample.p) == (50, 3)
        assert sample.specs == params.specs

    def test_deterministic(self, params):
        a = sample_latent_gaussian(params, 100, seed=7)
        b = sample_latent_gaussian(params, 100, seed=7)
        c = sample_latent_gaussian(params, 100, seed=8)
        np.testing.assert_array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_categorical_frequencies(self, params):
        n = 10000
        sample = sample_latent_gaussian(params, n, seed=3)
        for j in (1, 2):
            cuts = np.concatenate(([-np.inf], params.thresholds[j], [np.inf]))
            expected = np.diff(norm.cdf(cuts))
            observed = np.bincount(sample.column(j), minlength=expected.size) / n
            band = 4 * np.sqrt(expected * (1 - expected) / n)
            assert np.all(np.abs(observed - expected) <= band)

    def test_identity_sigma_independent(self, params):
        independent = LatentGaussianParams(specs=params.specs, sigma=np.eye(3), thresholds=params.thresholds,
                                           orderings=params.orderings, marginals=params.marginals)
        refit = estimate_latent_gaussian(sample_latent_gaussian(independent, 5000, seed=4))
        np.testing.assert_allclose(refit.sigma, np.eye(3), atol=0.05)

    def test_floor_mass(self):
        rng = np.random.default_rng(9)
        spend = np.maximum(rng.normal(size=2000), 0.0)
        data = MixedDataset([VariableSpec('spend', 'continuous'), OWNER],
                            np.column_stack([spend, rng.integers(0, 2, 2000)]))
        params = estimate_latent_gaussian(data)
        p = params.marginals['spend'].p_floor
        sample = sample_latent_gaussian(params, 10000, seed=5)
        fraction = np.mean(sample.values[:, 0] == params.marginals['spend'].floor)
        assert abs(fraction - p) <= 4 * np.sqrt(p * (1 - p) / 10000)

    def test_dict_round_trip(self, params):
        again = LatentGaussianParams.from_dict(params.to_dict())
        np.testing.assert_array_equal(again.sigma, params.sigma)
        np.testing.assert_array_equal(sample_latent_gaussian(again, 30, seed=1).values,
                                      sample_latent_gaussian(params, 30, seed=1).values)

    def test_summary(self, params):
        summary = summarize_latent(params)
        assert summary['p'] == 3
        assert summary['sigma_condition_number'] >= 1.0

    def test_invalid_sigma(self, params):
        with pytest.raises(ValidationError, match='correlation matrix'):
            LatentGaussianParams(specs=params.specs, sigma=2 * np.eye(3), thresholds=params.thresholds,
                                 orderings={}, marginals=params.marginals)
