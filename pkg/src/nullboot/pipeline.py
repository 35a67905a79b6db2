"""
Per-dataset evaluation: dissimilarity, clustering and validation index for every k.

The same ``evaluate`` call is applied to the observed dataset and to every
bootstrap replicate, so each replicate goes through the full chain including
any MDS step.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .clustering import classical_mds, cut_tree, linkage_cluster, pam
from .data import (
    CategoricalSeriesDataset,
    DissimilarityMatrix,
    MixedDataset,
    PointCloud,
    PresenceAbsenceData,
    ValidationError,
)
from .dissimilarity import (
    MixedDistanceConfig,
    check_series_costs,
    euclidean_matrix,
    kulczynski_matrix,
    mixed_type_distance,
    series_distance,
)
from .families import FAMILY_NAMES
from .mixture import gmm_noise_fit
from .seeds import derive_seed
from .spatial import DEFAULT_GRID, DEFAULT_REPS
from .validation import (
    PredictionStrengthConfig,
    adjusted_bic_profile,
    asw,
    bic,
    prediction_strength_profile,
)


METHODS = ('pam', 'average', 'complete', 'gmm', 'gmm-noise')
INDEXES = ('asw', 'ps', 'bic', 'adjusted-bic')
AGGREGATE_MODES = ('mean-rank', 'mean-raw', 'bonferroni')

DISTANCE_METHODS = ('pam', 'average', 'complete')
MIXTURE_METHODS = ('gmm', 'gmm-noise')


@dataclass
class PipelineSpec:
    """
    Everything that defines one bootstrap run apart from the data.

    Attributes:
        family: Null model family name
        method: Clustering method
        index: Validation index V
        ks: Candidate cluster counts K
        m: Number of bootstrap replicates
        seed: Master seed
        aggregate: Mode of the aggregated p-value
        b: Prediction strength half-splits
        mds_dim: MDS dimension before mixture fitting
        gmm_restarts: EM initialisations per k
        signed_bic: Divide adjusted BIC by BIC(1) rather than |BIC(1)|
        cont_bins: Quantile categories per continuous variable for polychoric estimation
        disjunction_grid: Trial p_d values of the spatial calibration
        disjunction_reps: Simulations per trial p_d
        distance: Mixed-type distance weights (None = from the schema)
        costs: Categorical series cost matrix (None = all ones)
        workers: Threads used for replicates and the spatial calibration
    """
    family: str
    method: str = 'pam'
    index: str = 'asw'
    ks: Tuple[int, ...] = tuple(range(2, 11))
    m: int = 99
    seed: int = 0
    aggregate: str = 'mean-rank'
    b: int = 50
    mds_dim: int = 4
    gmm_restarts: int = 10
    signed_bic: bool = False
    cont_bins: int = 10
    disjunction_grid: Tuple[float, ...] = DEFAULT_GRID
    disjunction_reps: int = DEFAULT_REPS
    distance: Optional[MixedDistanceConfig] = None
    costs: Optional[np.ndarray] = field(default=None, repr=False)
    workers: int = 1

    def __post_init__(self):
        self.ks = tuple(sorted(set(int(k) for k in self.ks)))
        self.disjunction_grid = tuple(float(g) for g in self.disjunction_grid)
        if self.family not in FAMILY_NAMES:
            raise ValidationError(f'Invalid family: {self.family} (must be one of {FAMILY_NAMES})')
        if self.method not in METHODS:
            raise ValidationError(f'Invalid method: {self.method} (must be one of {METHODS})')
        if self.index not in INDEXES:
            raise ValidationError(f'Invalid index: {self.index} (must be one of {INDEXES})')
        if self.aggregate not in AGGREGATE_MODES:
            raise ValidationError(f'Invalid aggregate mode: {self.aggregate} (must be one of {AGGREGATE_MODES})')
        if self.m < 1:
            raise ValidationError('m must be >= 1')
        if not self.ks or self.ks[0] < 1:
            raise ValidationError('K must be a nonempty set of positive integers')
        if self.seed < 0:
            raise ValidationError('seed must be >= 0')
        if self.b < 1:
            raise ValidationError('b must be >= 1')
        if self.mds_dim < 1:
            raise ValidationError('mds_dim must be >= 1')
        if self.workers < 1:
            raise ValidationError('workers must be >= 1')
        if self.index in ('asw', 'ps'):
            if self.method not in DISTANCE_METHODS:
                raise ValidationError(f'Index {self.index} needs one of {DISTANCE_METHODS} (got {self.method})')
            if self.ks[0] < 2:
                raise ValidationError(f'K may not contain k=1 for index {self.index}')
        elif self.method not in MIXTURE_METHODS:
            raise ValidationError(f'Index {self.index} needs one of {MIXTURE_METHODS} (got {self.method})')

    def to_dict(self) -> Dict[str, Any]:
        return {
            'family': self.family,
            'method': self.method,
            'index': self.index,
            'ks': list(self.ks),
            'm': self.m,
            'seed': self.seed,
            'aggregate': self.aggregate,
            'b': self.b,
            'mds_dim': self.mds_dim,
            'gmm_restarts': self.gmm_restarts,
            'signed_bic': self.signed_bic,
            'cont_bins': self.cont_bins,
            'disjunction_grid': list(self.disjunction_grid),
            'disjunction_reps': self.disjunction_reps,
            'distance': None if self.distance is None else self.distance.to_dict(),
            'costs': None if self.costs is None else np.asarray(self.costs).tolist(),
        }


def dissimilarity_for(data, spec: PipelineSpec) -> DissimilarityMatrix:
    """The dissimilarity matching the data shape."""
    if isinstance(data, MixedDataset):
        return mixed_type_distance(data, spec.distance)
    if isinstance(data, CategoricalSeriesDataset):
        costs = None if spec.costs is None else check_series_costs(spec.costs, data.h)
        return series_distance(data, costs)
    if isinstance(data, PresenceAbsenceData):
        return kulczynski_matrix(data)
    if isinstance(data, PointCloud):
        return euclidean_matrix(data)
    raise ValidationError(f'Unsupported data type {type(data).__name__}')


def embed_points(data, spec: PipelineSpec) -> PointCloud:
    """Classical MDS embedding of non-point data in ``spec.mds_dim`` dimensions."""
    if isinstance(data, PointCloud):
        return data
    coords = classical_mds(dissimilarity_for(data, spec), spec.mds_dim)
    return PointCloud(points=coords, names=tuple(f'mds{j + 1}' for j in range(spec.mds_dim)))


def _distance_profile(D: DissimilarityMatrix, spec: PipelineSpec, seed: int) -> Dict[int, float]:
    if spec.index == 'ps':
        cfg = PredictionStrengthConfig(b=spec.b, method=spec.method, seed=seed)
        return prediction_strength_profile(D, spec.ks, cfg)
    if spec.method == 'pam':
        return {k: asw(D, pam(D, k)) for k in spec.ks}
    tree = linkage_cluster(D, spec.method)
    return {k: asw(D, cut_tree(tree, k)) for k in spec.ks}


def _mixture_profile(data, D: Optional[DissimilarityMatrix], spec: PipelineSpec, seed: int) -> Dict[int, float]:
    if isinstance(data, PointCloud):
        Y = data.points
    else:
        Y = classical_mds(D, spec.mds_dim)
    fitted_ks = set(spec.ks)
    if spec.index == 'adjusted-bic':
        fitted_ks.add(1)
    with_noise = spec.method == 'gmm-noise'
    bics = {
        k: bic(gmm_noise_fit(Y, k, with_noise=with_noise, restarts=spec.gmm_restarts, seed=derive_seed(seed, k)))
        for k in sorted(fitted_ks)
    }
    if spec.index == 'bic':
        return {k: bics[k] for k in spec.ks}
    adjusted = adjusted_bic_profile(bics, signed=spec.signed_bic)
    return {k: adjusted[k] for k in spec.ks}


def evaluate(data, spec: PipelineSpec, seed: int) -> Dict[int, float]:
    """
    Index profile k -> V(X, C(X, k)) of one dataset.

    Args:
        data: Any supported dataset
        spec: Pipeline definition
        seed: Seed for the randomised parts (prediction strength splits, EM restarts)

    Returns:
        Mapping over spec.ks
    """
    if spec.method in MIXTURE_METHODS:
        D = None if isinstance(data, PointCloud) else dissimilarity_for(data, spec)
        return _mixture_profile(data, D, spec, seed)
    return _distance_profile(dissimilarity_for(data, spec), spec, seed)
