"""
Tests for dissimilarity computations.
"""

import numpy as np
import pytest

from nullboot.data import (
    MISSING,
    CategoricalSeriesDataset,
    MixedDataset,
    PointCloud,
    PresenceAbsenceData,
    ValidationError,
    VariableSpec,
)
from nullboot.dissimilarity import (
    MixedDistanceConfig,
    default_series_costs,
    euclidean_matrix,
    kulczynski_matrix,
    mixed_type_distance,
    series_distance,
)


def random_mixed(n=20, seed=0):
    rng = np.random.default_rng(seed)
    specs = [
        VariableSpec('income', 'continuous', weight=2.0),
        VariableSpec('risk', 'ordinal', levels=('low', 'mid', 'high')),
        VariableSpec('housing', 'nominal', levels=('own', 'rent', 'other'), weight=0.5),
    ]
    values = np.column_stack([rng.gamma(2.0, 3.0, n), rng.integers(0, 3, n), rng.integers(0, 3, n)])
    return MixedDataset(specs, values)


class TestMixedTypeDistance:
    """Test the weighted mixed-type Euclidean distance."""

    def test_identical_rows(self):
        data = MixedDataset([VariableSpec('x', 'continuous')], np.array([[2.5], [2.5]]))
        assert mixed_type_distance(data).values[0, 1] == 0.0

    def test_single_continuous(self):
        data = MixedDataset([VariableSpec('x', 'continuous')], np.array([[1.0], [4.0]]))
        assert mixed_type_distance(data).values[0, 1] == pytest.approx(3.0)

    def test_nominal_dummies(self):
        spec = VariableSpec('housing', 'nominal', levels=('own', 'rent', 'other'))
        data = MixedDataset([spec], np.array([[0.0], [1.0]]))
        assert mixed_type_distance(data).values[0, 1] == pytest.approx(np.sqrt(2.0))

    def test_ordinal_likert_coding(self):
        spec = VariableSpec('risk', 'ordinal', levels=('low', 'mid', 'high'))
        data = MixedDataset([spec], np.array([[0.0], [2.0]]))
        assert mixed_type_distance(data).values[0, 1] == pytest.approx(2.0)

    def test_uniform_weight_scaling(self):
        data = random_mixed()
        base = MixedDistanceConfig.from_specs(data.specs)
        scaled = MixedDistanceConfig(weights=tuple(4.0 * w for w in base.weights),
                                     dummy_weights=base.dummy_weights)
        np.testing.assert_allclose(mixed_type_distance(data, scaled).values,
                                   2.0 * mixed_type_distance(data, base).values, atol=1e-12)

    def test_dummy_weights_shape(self):
        data = random_mixed()
        cfg = MixedDistanceConfig(weights=(1.0, 1.0, 1.0), dummy_weights={'housing': (1.0, 1.0)})
        with pytest.raises(ValidationError, match='Dummy weights'):
            mixed_type_distance(data, cfg)

    def test_weight_vector_shape(self):
        data = random_mixed()
        cfg = MixedDistanceConfig(weights=(1.0,))
        with pytest.raises(ValidationError, match='Weight vector'):
            mixed_type_distance(data, cfg)

    def test_standardize(self):
        spec = VariableSpec('x', 'continuous')
        data = MixedDataset([spec], np.array([[0.0], [10.0], [20.0]]))
        cfg = MixedDistanceConfig(weights=(1.0,), standardize=True)
        assert mixed_type_distance(data, cfg).values[0, 2] == pytest.approx(2.0)

    def test_config_dict_round_trip(self):
        cfg = MixedDistanceConfig.from_specs(random_mixed().specs, standardize=True)
        assert MixedDistanceConfig.from_dict(cfg.to_dict()) == cfg


class TestKulczynski:
    """Test Kulczynski dissimilarity between ranges."""

    def make(self, matrix):
        matrix = np.asarray(matrix)
        return PresenceAbsenceData(matrix, np.zeros((matrix.shape[1],) * 2, dtype=bool))

    def test_identical_and_disjoint(self):
        D = kulczynski_matrix(self.make([[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1]]))
        assert D.values[0, 1] == 0.0
        assert D.values[0, 2] == 1.0

    def test_partial_overlap(self):
        D = kulczynski_matrix(self.make([[1, 1, 0, 0], [0, 1, 1, 1]]))
        assert D.values[0, 1] == pytest.approx(7.0 / 12.0)

    def test_range(self):
        rng = np.random.default_rng(5)
        matrix = rng.integers(0, 2, size=(30, 12))
        matrix[:, 0] = 1
        D = kulczynski_matrix(self.make(matrix))
        assert D.values.min() >= 0.0
        assert D.values.max() <= 1.0


class TestSeriesDistance:
    """Test the per-day categorical series distance."""

    def test_identical(self):
        data = CategoricalSeriesDataset(np.array([[1, 2, MISSING], [1, 2, MISSING]]), h=3)
        assert series_distance(data).values[0, 1] == 0.0

    def test_average_cost(self):
        data = CategoricalSeriesDataset(np.array([[1, 2], [1, 3]]), h=3)
        assert series_distance(data).values[0, 1] == pytest.approx(0.5)

    def test_missing_is_a_category(self):
        data = CategoricalSeriesDataset(np.array([[1, 2, 3, 1], [1, MISSING, 3, MISSING]]), h=3)
        assert series_distance(data).values[0, 1] == pytest.approx(2.0 / 4.0)

    def test_all_ones_matches_hamming(self):
        rng = np.random.default_rng(11)
        series = rng.integers(0, 5, size=(12, 30))
        data = CategoricalSeriesDataset(series, h=4)
        hamming = (series[:, None, :] != series[None, :, :]).mean(axis=2)
        np.testing.assert_allclose(series_distance(data, default_series_costs(4)).values, hamming, atol=1e-12)

    def test_custom_costs(self):
        costs = default_series_costs(2)
        costs[0, 1] = costs[1, 0] = 0.25
        data = CategoricalSeriesDataset(np.array([[1, 1], [2, 1]]), h=2)
        assert series_distance(data, costs).values[0, 1] == pytest.approx(0.125)

    def test_asymmetric_costs(self):
        costs = default_series_costs(2)
        costs[0, 1] = 0.5
        data = CategoricalSeriesDataset(np.array([[1, 1], [2, 1]]), h=2)
        with pytest.raises(ValidationError, match='symmetric'):
            series_distance(data, costs)

    def test_nonzero_diagonal(self):
        costs = default_series_costs(2)
        costs[2, 2] = 1.0
        data = CategoricalSeriesDataset(np.array([[1, 1], [2, 1]]), h=2)
        with pytest.raises(ValidationError, match='zero diagonal'):
            series_distance(data, costs)


class TestEuclidean:
    """Test Euclidean distances of point clouds."""

    def test_three_four_five(self):
        D = euclidean_matrix(PointCloud(np.array([[0.0, 0.0], [3.0, 4.0]])))
        assert D.values[0, 1] == pytest.approx(5.0)
