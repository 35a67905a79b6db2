"""
Spatially autocorrelated null model for species presence-absence ranges.

A species range grows region by region from an initial region drawn by
attractivity. Each further region comes from the non-neighbors of the range with
the disjunction probability p_d, otherwise from its neighbors.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.stats import linregress

from .data import NullbootWarning, PresenceAbsenceData, ValidationError
from .seeds import derive_rng, derive_seed


DEFAULT_GRID = tuple(round(0.1 * i, 1) for i in range(10))
DEFAULT_REPS = 20


def connectivity_components(range_regions, adjacency: np.ndarray) -> int:
    """
    Number of connected pieces of a range in the region adjacency graph.

    Args:
        range_regions: Boolean mask over regions, or region indexes
        adjacency: Symmetric boolean adjacency matrix

    Raises:
        ValidationError: If the range is empty
    """
    adjacency = np.asarray(adjacency, dtype=bool)
    index = np.asarray(range_regions)
    if index.dtype == bool:
        index = np.flatnonzero(index)
    if index.size == 0:
        raise ValidationError('Range must contain at least one region')
    sub = adjacency[np.ix_(index, index)]
    n_components, _ = connected_components(csr_matrix(sub), directed=False)
    return int(n_components)


def range_components(data: PresenceAbsenceData) -> np.ndarray:
    """Connectivity components a_i of every species range."""
    return np.array([connectivity_components(row, data.adjacency) for row in data.matrix])


def observed_qd(data: PresenceAbsenceData) -> float:
    """
    Naive disjunction estimate q_d = sum(a_i - 1) / sum(n_i - 1).

    Raises:
        ValidationError: If every species occupies a single region
    """
    denominator = int((data.sizes - 1).sum())
    if denominator == 0:
        raise ValidationError('q_d undefined: every species occupies a single region')
    return float((range_components(data) - 1).sum() / denominator)


@dataclass
class DisjunctionEstimate:
    """Regression calibration of p_d against simulated q_d."""
    p_d: float
    q_d: float
    slope: float
    intercept: float
    grid: Tuple[float, ...]
    means: Tuple[float, ...]

    def to_dict(self) -> Dict:
        return {
            'p_d': self.p_d,
            'q_d': self.q_d,
            'slope': self.slope,
            'intercept': self.intercept,
            'grid': list(self.grid),
            'means': list(self.means),
        }

    @classmethod
    def from_dict(cls, d: Dict) -> 'DisjunctionEstimate':
        return cls(p_d=float(d['p_d']), q_d=float(d['q_d']), slope=float(d['slope']),
                   intercept=float(d['intercept']), grid=tuple(d['grid']), means=tuple(d['means']))


@dataclass
class SpatialRangeParams:
    """
    Fitted spatial range model.

    Attributes:
        p_d: Disjunction probability
        size_probs: P_S over sizes 1..n_regions
        attractivity: P_I over regions
        adjacency: Symmetric irreflexive region adjacency
        regions: Region names
        calibration: How p_d was obtained, when estimated
    """
    p_d: float
    size_probs: np.ndarray
    attractivity: np.ndarray
    adjacency: np.ndarray
    regions: Tuple[str, ...] = ()
    calibration: Optional[DisjunctionEstimate] = field(default=None, compare=False)

    def __post_init__(self):
        self.size_probs = np.asarray(self.size_probs, dtype=float)
        self.attractivity = np.asarray(self.attractivity, dtype=float)
        self.adjacency = np.asarray(self.adjacency, dtype=bool)
        n_regions = self.attractivity.shape[0]
        self.regions = tuple(self.regions) or tuple(str(r + 1) for r in range(n_regions))
        if not 0.0 <= self.p_d <= 1.0:
            raise ValidationError(f'p_d must lie in [0, 1] (got {self.p_d})')
        if self.size_probs.shape != (n_regions,):
            raise ValidationError(f'Size distribution must cover sizes 1..{n_regions}')
        for name, probs in (('Size distribution', self.size_probs), ('Attractivity', self.attractivity)):
            if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-10:
                raise ValidationError(f'{name} must be a probability vector')
        if self.adjacency.shape != (n_regions, n_regions):
            raise ValidationError(f'Adjacency must be {n_regions} x {n_regions}')
        if np.any(np.diag(self.adjacency)) or np.any(self.adjacency != self.adjacency.T):
            raise ValidationError('Adjacency must be symmetric and irreflexive')

    @property
    def n_regions(self) -> int:
        return self.attractivity.shape[0]

    def with_p_d(self, p_d: float) -> 'SpatialRangeParams':
        return SpatialRangeParams(p_d=p_d, size_probs=self.size_probs, attractivity=self.attractivity,
                                  adjacency=self.adjacency, regions=self.regions)

    def to_dict(self) -> Dict:
        return {
            'p_d': self.p_d,
            'size_probs': self.size_probs.tolist(),
            'attractivity': self.attractivity.tolist(),
            'adjacency': self.adjacency.astype(int).tolist(),
            'regions': list(self.regions),
            'calibration': None if self.calibration is None else self.calibration.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Dict) -> 'SpatialRangeParams':
        calibration = d.get('calibration')
        return cls(
            p_d=float(d['p_d']),
            size_probs=np.asarray(d['size_probs'], dtype=float),
            attractivity=np.asarray(d['attractivity'], dtype=float),
            adjacency=np.asarray(d['adjacency'], dtype=bool),
            regions=tuple(d.get('regions', ())),
            calibration=None if calibration is None else DisjunctionEstimate.from_dict(calibration),
        )


def _draw_from(candidates: np.ndarray, attractivity: np.ndarray, rng: np.random.Generator) -> int:
    weights = attractivity[candidates]
    total = weights.sum()
    if total <= 0:
        return int(candidates[rng.integers(candidates.size)])
    return int(candidates[rng.choice(candidates.size, p=weights / total)])


def _grow_range(params: SpatialRangeParams, size: int, rng: np.random.Generator) -> np.ndarray:
    chosen = np.zeros(params.n_regions, dtype=bool)
    chosen[_draw_from(np.arange(params.n_regions), params.attractivity, rng)] = True
    for _ in range(1, size):
        near = params.adjacency[chosen].any(axis=0) & ~chosen
        far = ~params.adjacency[chosen].any(axis=0) & ~chosen
        near_idx, far_idx = np.flatnonzero(near), np.flatnonzero(far)
        if near_idx.size and far_idx.size:
            pool = far_idx if rng.uniform() < params.p_d else near_idx
        else:
            pool = near_idx if near_idx.size else far_idx
        chosen[_draw_from(pool, params.attractivity, rng)] = True
    return chosen


def sample_spatial(params: SpatialRangeParams, n_species: int, seed: int) -> PresenceAbsenceData:
    """
    Simulate n_species independent ranges.

    Args:
        params: Fitted range model
        n_species: Number of species (>= 1)
        seed: Seed of the draw

    Returns:
        PresenceAbsenceData over the model's regions and adjacency
    """
    if n_species < 1:
        raise ValidationError('n_species >= 1 required')
    rng = derive_rng(seed)
    sizes = rng.choice(np.arange(1, params.n_regions + 1), size=n_species, p=params.size_probs)
    matrix = np.array([_grow_range(params, int(size), rng) for size in sizes])
    return PresenceAbsenceData(matrix=matrix, adjacency=params.adjacency, regions=params.regions)


def empirical_spatial_params(data: PresenceAbsenceData, p_d: float = 0.0) -> SpatialRangeParams:
    """P_S from the species sizes, P_I proportional to species counts per region."""
    size_probs = np.bincount(data.sizes, minlength=data.n_regions + 1)[1:] / data.n_species
    counts = data.matrix.sum(axis=0).astype(float)
    return SpatialRangeParams(p_d=p_d, size_probs=size_probs, attractivity=counts / counts.sum(),
                              adjacency=data.adjacency, regions=data.regions)


def simulate_qd(params: SpatialRangeParams, n_species: int, seed: int) -> float:
    """q_d of one simulated dataset; 0 when every simulated range is a single region."""
    sample = sample_spatial(params, n_species, seed)
    denominator = int((sample.sizes - 1).sum())
    if denominator == 0:
        return 0.0
    return float((range_components(sample) - 1).sum() / denominator)


def estimate_disjunction(data: PresenceAbsenceData, grid: Sequence[float] = DEFAULT_GRID,
                         reps: int = DEFAULT_REPS, seed: int = 0, workers: int = 1) -> DisjunctionEstimate:
    """
    Calibrate p_d by regressing simulated q_d on trial p_d values.

    For every grid value ``reps`` datasets of the observed size are simulated with
    P_S and P_I held at their empirical values; the mean simulated q_d is
    regressed linearly on p_d and the fit is inverted at the observed q_d.

    Args:
        data: Observed presence-absence data
        grid: Trial p_d values
        reps: Simulations per grid value
        seed: Seed from which every simulation is derived
        workers: Threads used for the grid simulations

    Returns:
        DisjunctionEstimate with p_d clipped to [0, 1]

    Raises:
        ValidationError: If q_d is undefined or the grid is too small
    """
    grid = tuple(float(g) for g in grid)
    if len(set(grid)) < 2:
        raise ValidationError('Disjunction grid needs at least 2 distinct values')
    if any(not 0.0 <= g <= 1.0 for g in grid):
        raise ValidationError('Disjunction grid values must lie in [0, 1]')
    if reps < 1:
        raise ValidationError('reps must be >= 1')
    q_d = observed_qd(data)
    base = empirical_spatial_params(data)

    def grid_mean(g: int) -> float:
        params = base.with_p_d(grid[g])
        return float(np.mean([
            simulate_qd(params, data.n_species, derive_seed(seed, g, r))
            for r in range(reps)
        ]))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            means = list(executor.map(grid_mean, range(len(grid))))
    else:
        means = [grid_mean(g) for g in range(len(grid))]

    fit = linregress(grid, means)
    if fit.slope > 0:
        p_d = float(np.clip((q_d - fit.intercept) / fit.slope, 0.0, 1.0))
    else:
        closest = int(np.argmin(np.abs(np.asarray(means) - q_d)))
        p_d = grid[closest]
        warnings.warn(
            f'Simulated q_d does not increase with p_d (slope {fit.slope:.4g}); '
            f'using the grid value with the closest mean ({p_d})',
            NullbootWarning,
            stacklevel=2,
        )
    return DisjunctionEstimate(p_d=p_d, q_d=q_d, slope=float(fit.slope), intercept=float(fit.intercept),
                               grid=grid, means=tuple(means))


def estimate_spatial(data: PresenceAbsenceData, grid: Sequence[float] = DEFAULT_GRID,
                     reps: int = DEFAULT_REPS, seed: int = 0, workers: int = 1) -> SpatialRangeParams:
    """Empirical P_S and P_I plus the regression-calibrated p_d."""
    calibration = estimate_disjunction(data, grid=grid, reps=reps, seed=seed, workers=workers)
    params = empirical_spatial_params(data, p_d=calibration.p_d)
    params.calibration = calibration
    return params


def summarize_spatial(params: SpatialRangeParams) -> Dict:
    """Estimation diagnostics for reports."""
    sizes = np.arange(1, params.n_regions + 1)
    report = {
        'n_regions': params.n_regions,
        'p_d': params.p_d,
        'mean_species_size': float((sizes * params.size_probs).sum()),
        'max_species_size': int(sizes[params.size_probs > 0].max()),
    }
    if params.calibration is not None:
        report.update({
            'q_d': params.calibration.q_d,
            'regression_slope': params.calibration.slope,
            'regression_intercept': params.calibration.intercept,
        })
    return report
