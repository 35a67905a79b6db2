"""
Null model families and their registry.

A family bundles the estimator T_n and the sampler of one parametric null model
for one data shape. The bootstrap engine only talks to families through the
``NullFamily`` protocol; ``resolve_family`` maps the configured name to an
instance.
"""

from dataclasses import dataclass
from typing import Any, Dict, Protocol, Tuple, Type, runtime_checkable

import numpy as np

from .data import (
    CategoricalSeriesDataset,
    MixedDataset,
    PointCloud,
    PresenceAbsenceData,
    ValidationError,
)
from .latent import LatentGaussianParams, estimate_latent_gaussian, sample_latent_gaussian, summarize_latent
from .markov import MarkovDosageParams, estimate_markov, sample_markov, summarize_markov
from .seeds import derive_rng
from .spatial import SpatialRangeParams, estimate_spatial, sample_spatial, summarize_spatial


@runtime_checkable
class NullFamily(Protocol):
    """
    Interface of a parametric null model family.

    Attributes:
        name: Registry key, also written into parameter files
        data_type: Dataset class the family is estimated from and samples
    """
    name: str
    data_type: type

    def estimate(self, data: Any, spec: Any, seed: int) -> Any:
        """Fit the family's parameters to observed data."""

    def sample(self, params: Any, n: int, seed: int) -> Any:
        """Draw one dataset of n observations."""

    def sample_size(self, data: Any) -> int:
        """Number of observations a replicate of ``data`` must have."""

    def params_from_dict(self, d: Dict) -> Any:
        """Inverse of ``params.to_dict()``."""

    def report(self, params: Any) -> Dict:
        """Estimation diagnostics."""


# ---------------------------------------------------------------------------
# Plain Gaussian null
# ---------------------------------------------------------------------------

@dataclass
class GaussianParams:
    """Single multivariate normal fitted by maximum likelihood."""
    mean: np.ndarray
    cov: np.ndarray
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.cov = np.asarray(self.cov, dtype=float).reshape(self.mean.size, self.mean.size)
        self.names = tuple(self.names) or tuple(f'x{j + 1}' for j in range(self.mean.size))
        if not np.allclose(self.cov, self.cov.T):
            raise ValidationError('Covariance must be symmetric')
        if np.linalg.eigvalsh(self.cov).min() < -1e-8 * max(1.0, float(np.abs(self.cov).max())):
            raise ValidationError('Covariance must be positive semi-definite')

    def to_dict(self) -> Dict:
        return {'mean': self.mean.tolist(), 'cov': self.cov.tolist(), 'names': list(self.names)}

    @classmethod
    def from_dict(cls, d: Dict) -> 'GaussianParams':
        return cls(mean=d['mean'], cov=d['cov'], names=tuple(d.get('names', ())))


def estimate_gaussian(data: PointCloud) -> GaussianParams:
    """Sample mean and ML (divisor n) covariance."""
    return GaussianParams(mean=data.points.mean(axis=0),
                          cov=np.cov(data.points, rowvar=False, bias=True),
                          names=data.names)


def sample_gaussian(params: GaussianParams, n: int, seed: int) -> PointCloud:
    if n < 2:
        raise ValidationError('n >= 2 required')
    rng = derive_rng(seed)
    evals, evecs = np.linalg.eigh((params.cov + params.cov.T) / 2)
    factor = evecs * np.sqrt(np.clip(evals, 0.0, None))
    points = params.mean + rng.standard_normal((n, params.mean.size)) @ factor.T
    return PointCloud(points=points, names=params.names)


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatentGaussianFamily:
    name: str = 'latent-gaussian'
    data_type: type = MixedDataset

    def estimate(self, data: MixedDataset, spec, seed: int) -> LatentGaussianParams:
        return estimate_latent_gaussian(data, cont_bins=spec.cont_bins)

    def sample(self, params: LatentGaussianParams, n: int, seed: int) -> MixedDataset:
        return sample_latent_gaussian(params, n, seed)

    def sample_size(self, data: MixedDataset) -> int:
        return data.n

    def params_from_dict(self, d: Dict) -> LatentGaussianParams:
        return LatentGaussianParams.from_dict(d)

    def report(self, params: LatentGaussianParams) -> Dict:
        return summarize_latent(params)


@dataclass(frozen=True)
class MarkovFamily:
    name: str = 'markov'
    data_type: type = CategoricalSeriesDataset

    def estimate(self, data: CategoricalSeriesDataset, spec, seed: int) -> MarkovDosageParams:
        return estimate_markov(data)

    def sample(self, params: MarkovDosageParams, n: int, seed: int) -> CategoricalSeriesDataset:
        return sample_markov(params, n, seed=seed)

    def sample_size(self, data: CategoricalSeriesDataset) -> int:
        return data.n

    def params_from_dict(self, d: Dict) -> MarkovDosageParams:
        return MarkovDosageParams.from_dict(d)

    def report(self, params: MarkovDosageParams) -> Dict:
        return summarize_markov(params)


@dataclass(frozen=True)
class SpatialFamily:
    name: str = 'spatial'
    data_type: type = PresenceAbsenceData

    def estimate(self, data: PresenceAbsenceData, spec, seed: int) -> SpatialRangeParams:
        return estimate_spatial(data, grid=spec.disjunction_grid, reps=spec.disjunction_reps,
                                seed=seed, workers=spec.workers)

    def sample(self, params: SpatialRangeParams, n: int, seed: int) -> PresenceAbsenceData:
        return sample_spatial(params, n, seed)

    def sample_size(self, data: PresenceAbsenceData) -> int:
        return data.n_species

    def params_from_dict(self, d: Dict) -> SpatialRangeParams:
        return SpatialRangeParams.from_dict(d)

    def report(self, params: SpatialRangeParams) -> Dict:
        return summarize_spatial(params)


@dataclass(frozen=True)
class GaussianFamily:
    name: str = 'gaussian'
    data_type: type = PointCloud

    def estimate(self, data: PointCloud, spec, seed: int) -> GaussianParams:
        return estimate_gaussian(data)

    def sample(self, params: GaussianParams, n: int, seed: int) -> PointCloud:
        return sample_gaussian(params, n, seed)

    def sample_size(self, data: PointCloud) -> int:
        return data.n

    def params_from_dict(self, d: Dict) -> GaussianParams:
        return GaussianParams.from_dict(d)

    def report(self, params: GaussianParams) -> Dict:
        evals = np.linalg.eigvalsh(params.cov)
        return {'q': int(params.mean.size), 'covariance_eigenvalues': sorted(evals.tolist(), reverse=True)}


_FAMILIES: Dict[str, Type] = {
    'latent-gaussian': LatentGaussianFamily,
    'markov': MarkovFamily,
    'spatial': SpatialFamily,
    'gaussian': GaussianFamily,
}

FAMILY_NAMES = tuple(_FAMILIES)


def resolve_family(family) -> NullFamily:
    """
    Map a family name (or pass through a family instance) to a NullFamily.

    Raises:
        ValidationError: On an unknown family name
    """
    if isinstance(family, NullFamily):
        return family
    if family not in _FAMILIES:
        raise ValidationError(f'Unknown null model family {family!r} (available: {", ".join(FAMILY_NAMES)})')
    return _FAMILIES[family]()
