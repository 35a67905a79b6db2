"""
Dissimilarities between observations: weighted mixed-type Euclidean,
Kulczynski on presence-absence ranges, and per-day costs between categorical series.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .data import (
    CategoricalSeriesDataset,
    DissimilarityMatrix,
    MISSING,
    MixedDataset,
    PointCloud,
    PresenceAbsenceData,
    ValidationError,
    VariableSpec,
)


@dataclass(frozen=True)
class MixedDistanceConfig:
    """
    Weights for the mixed-type Euclidean distance.

    Attributes:
        weights: One nonnegative weight per variable
        dummy_weights: Per nominal variable name, one nonnegative weight per level
        standardize: Divide continuous/ordinal coordinates by their sample
            standard deviation before weighting
    """
    weights: Tuple[float, ...]
    dummy_weights: Dict[str, Tuple[float, ...]] = field(default_factory=dict)
    standardize: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'weights', tuple(float(w) for w in self.weights))
        object.__setattr__(
            self, 'dummy_weights',
            {name: tuple(float(w) for w in ws) for name, ws in self.dummy_weights.items()},
        )
        if any(w < 0 for w in self.weights):
            raise ValidationError('Variable weights must be >= 0')
        for name, ws in self.dummy_weights.items():
            if any(w < 0 for w in ws):
                raise ValidationError(f'Dummy weights for {name!r} must be >= 0')

    @classmethod
    def from_specs(cls, specs: Sequence[VariableSpec],
                   dummy_weights: Optional[Dict[str, Sequence[float]]] = None,
                   standardize: bool = False) -> 'MixedDistanceConfig':
        """Take variable weights from the schema; dummy weights default to 1 per level."""
        dummy_weights = dict(dummy_weights or {})
        for spec in specs:
            if spec.kind == 'nominal':
                dummy_weights.setdefault(spec.name, (1.0,) * len(spec.levels))
        return cls(weights=tuple(spec.weight for spec in specs),
                   dummy_weights=dummy_weights, standardize=standardize)

    def check(self, specs: Sequence[VariableSpec]):
        """Raise ValidationError unless this config fits the given schema."""
        if len(self.weights) != len(specs):
            raise ValidationError(
                f'Weight vector has {len(self.weights)} entries for {len(specs)} variables'
            )
        for spec in specs:
            if spec.kind != 'nominal':
                continue
            ws = self.dummy_weights.get(spec.name)
            if ws is None or len(ws) != len(spec.levels):
                raise ValidationError(
                    f'Dummy weights for {spec.name!r} must have {len(spec.levels)} entries'
                )

    def to_dict(self) -> Dict:
        return {
            'weights': list(self.weights),
            'dummy_weights': {name: list(ws) for name, ws in self.dummy_weights.items()},
            'standardize': self.standardize,
        }

    @classmethod
    def from_dict(cls, d: Dict) -> 'MixedDistanceConfig':
        return cls(weights=tuple(d['weights']),
                   dummy_weights={k: tuple(v) for k, v in d.get('dummy_weights', {}).items()},
                   standardize=bool(d.get('standardize', False)))


def mixed_coordinates(data: MixedDataset, cfg: MixedDistanceConfig) -> np.ndarray:
    """
    Embed a mixed dataset so that plain Euclidean distance is the mixed-type distance.

    Ordinal and binary variables use Likert coding 1..h; nominal variables become
    dummy vectors scaled by the square roots of their level weights.
    """
    cfg.check(data.specs)
    blocks = []
    for j, (spec, w) in enumerate(zip(data.specs, cfg.weights)):
        col = data.values[:, j]
        if spec.kind == 'nominal':
            dummies = np.zeros((data.n, len(spec.levels)))
            dummies[np.arange(data.n), col.astype(int)] = 1.0
            blocks.append(dummies * np.sqrt(w * np.asarray(cfg.dummy_weights[spec.name])))
            continue
        coord = col + 1.0 if spec.is_categorical else col.astype(float)
        if cfg.standardize:
            sd = coord.std(ddof=1)
            if sd > 0:
                coord = coord / sd
        blocks.append((np.sqrt(w) * coord)[:, None])
    return np.hstack(blocks)


def mixed_type_distance(data: MixedDataset, cfg: Optional[MixedDistanceConfig] = None) -> DissimilarityMatrix:
    """
    Weighted Euclidean distance over continuous, ordinal and dummy-coded nominal variables.

    d(i, j) = sqrt(sum_v w_v * delta_v(i, j)^2)

    Args:
        data: Mixed dataset
        cfg: Weights (default: taken from the schema, unit dummy weights)

    Raises:
        ValidationError: If the weight vectors do not match the schema
    """
    if cfg is None:
        cfg = MixedDistanceConfig.from_specs(data.specs)
    coords = mixed_coordinates(data, cfg)
    return DissimilarityMatrix(squareform(pdist(coords)))


def kulczynski_matrix(data: PresenceAbsenceData) -> DissimilarityMatrix:
    """
    Kulczynski dissimilarity between species ranges.

    d(x1, x2) = 1 - (|x1 & x2| / |x1| + |x1 & x2| / |x2|) / 2
    """
    x = data.matrix.astype(float)
    shared = x @ x.T
    sizes = x.sum(axis=1)
    d = 1.0 - 0.5 * (shared / sizes[:, None] + shared / sizes[None, :])
    d = np.clip(d, 0.0, 1.0)
    np.fill_diagonal(d, 0.0)
    return DissimilarityMatrix(d)


def default_series_costs(h: int) -> np.ndarray:
    """Cost 1 between any two distinct categories, missing included; 0 on the diagonal."""
    costs = np.ones((h + 1, h + 1))
    np.fill_diagonal(costs, 0.0)
    return costs


def check_series_costs(costs: np.ndarray, h: int) -> np.ndarray:
    costs = np.asarray(costs, dtype=float)
    if costs.shape != (h + 1, h + 1):
        raise ValidationError(f'Cost matrix must be {h + 1} x {h + 1} (last row/column is missing)')
    if np.any(costs < 0) or not np.all(np.isfinite(costs)):
        raise ValidationError('Cost matrix entries must be finite and >= 0')
    if np.any(np.diag(costs) != 0):
        raise ValidationError('Cost matrix must have a zero diagonal')
    if np.any(costs != costs.T):
        raise ValidationError('Cost matrix must be symmetric')
    return costs


def series_distance(data: CategoricalSeriesDataset, category_costs: Optional[np.ndarray] = None) -> DissimilarityMatrix:
    """
    Average per-day cost between categorical series, missing treated as its own category.

    d(i, j) = sum_t cost(s_i(t), s_j(t)) / T

    Args:
        data: Categorical series
        category_costs: (h+1) x (h+1) cost matrix; row/column h is the missing category

    Raises:
        ValidationError: If the cost matrix is not symmetric with zero diagonal
    """
    costs = default_series_costs(data.h) if category_costs is None else check_series_costs(category_costs, data.h)
    codes = np.where(data.series == MISSING, data.h, data.series - 1)
    total = np.zeros((data.n, data.n))
    for t in range(data.T):
        day = codes[:, t]
        total += costs[day[:, None], day[None, :]]
    return DissimilarityMatrix(total / data.T)


def euclidean_matrix(data: PointCloud) -> DissimilarityMatrix:
    return DissimilarityMatrix(squareform(pdist(data.points)))
