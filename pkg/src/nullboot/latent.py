"""
Latent Gaussian null model for mixed-type data.

Every variable is a monotone transform of one coordinate of a multivariate normal
vector z ~ N(0, Sigma): categorical variables by cutting z_j at thresholds,
continuous variables through the inverse of a composite cdf (point mass at the
floor value plus a unimodal density above it). Nominal variables enter with an
estimated level ordering.
"""

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.stats import gaussian_kde, norm

from .data import MixedDataset, NullbootWarning, NumericalError, ValidationError, VariableSpec
from .polychoric import polychoric_correlation, thresholds_from_counts
from .seeds import derive_rng


GRID_POINTS = 512
MIN_DENSITY_POINTS = 10

# Bandwidth widening gives up after this many steps of initial bandwidth / 20
MAX_WIDEN_STEPS = 2000

# Sigma projection moving any entry further than this is reported
PROJECTION_WARN = 0.1


def nominal_ordering(data: MixedDataset, j: int) -> Tuple[int, ...]:
    """
    Order the levels of nominal variable j by how their dummies correlate with the ordered variables.

    For each level the sample correlations of its dummy indicator with every
    continuous, ordinal and binary variable are averaged; levels are sorted by
    that average, ascending, ties keeping the original level order. Levels whose
    dummy is constant (absent or universal) go last.

    Returns:
        Level indexes in latent order (position r holds the level placed r-th)

    Raises:
        ValidationError: If variable j is not nominal
    """
    spec = data.specs[j]
    if spec.kind != 'nominal':
        raise ValidationError(f'Variable {spec.name!r} is not nominal')
    reference = [i for i, s in enumerate(data.specs) if s.kind != 'nominal']
    codes = data.column(j)
    n_levels = len(spec.levels)
    averages = np.zeros(n_levels)
    constant = []
    for g in range(n_levels):
        dummy = (codes == g).astype(float)
        if dummy.std() == 0:
            constant.append(g)
            continue
        correlations = []
        for i in reference:
            other = data.values[:, i]
            if other.std() > 0:
                correlations.append(np.corrcoef(dummy, other)[0, 1])
        averages[g] = np.mean(correlations) if correlations else 0.0
    if constant:
        warnings.warn(
            f'Variable {spec.name!r}: constant dummies for levels '
            f'{[spec.levels[g] for g in constant]} placed last',
            NullbootWarning,
            stacklevel=2,
        )
    varying = [g for g in range(n_levels) if g not in constant]
    ranked = sorted(varying, key=lambda g: averages[g])
    return tuple(ranked + constant)


def _count_modes(density: np.ndarray) -> int:
    tolerance = 1e-12 * float(density.max())
    steps = np.diff(density)
    signs = np.sign(steps[np.abs(steps) > tolerance])
    if signs.size == 0:
        return 1
    modes = int(np.sum((signs[:-1] > 0) & (signs[1:] < 0)))
    if signs[0] < 0:
        modes += 1
    if signs[-1] > 0:
        modes += 1
    return modes


@dataclass
class UnimodalDensity:
    """
    Gaussian kernel density forced to be unimodal, tabulated on a grid.

    Attributes:
        grid: Evaluation points (ascending)
        pdf: Density values, integrating to 1 on the grid
        bandwidth: Final kernel bandwidth
        initial_bandwidth: Silverman rule-of-thumb bandwidth
        steps: Number of widening steps needed to reach one mode
    """
    grid: np.ndarray
    pdf: np.ndarray
    bandwidth: float
    initial_bandwidth: float
    steps: int
    cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.pdf = np.asarray(self.pdf, dtype=float)
        cdf = cumulative_trapezoid(self.pdf, self.grid, initial=0.0)
        self.cdf = cdf / cdf[-1]

    def ppf(self, u) -> np.ndarray:
        return np.interp(u, self.cdf, self.grid)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.ppf(rng.uniform(size=n))

    def to_dict(self) -> Dict:
        return {
            'grid': self.grid.tolist(),
            'pdf': self.pdf.tolist(),
            'bandwidth': self.bandwidth,
            'initial_bandwidth': self.initial_bandwidth,
            'steps': self.steps,
        }

    @classmethod
    def from_dict(cls, d: Dict) -> 'UnimodalDensity':
        return cls(grid=d['grid'], pdf=d['pdf'], bandwidth=float(d['bandwidth']),
                   initial_bandwidth=float(d['initial_bandwidth']), steps=int(d['steps']))


def silverman_bandwidth(values: np.ndarray) -> float:
    """0.9 min(sd, IQR / 1.34) n^(-1/5), falling back to sd when the IQR is zero."""
    sd = float(np.std(values, ddof=1))
    q75, q25 = np.percentile(values, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    if spread <= 0:
        spread = max(abs(float(values[0])), 1.0) * 1e-3
    return 0.9 * spread * values.size ** -0.2


def unimodal_density_fit(values, floor: Optional[float] = None) -> UnimodalDensity:
    """
    Kernel density estimate widened until it has a single mode.

    Starting from Silverman's bandwidth h0, the bandwidth grows by h0 / 20 per
    step until the density has one mode on a 512-point grid over
    [min - 3h, max + 3h] (cut at ``floor`` when given).

    Args:
        values: Sample of at least 10 reals
        floor: Lower support bound, if any

    Raises:
        ValidationError: With fewer than 10 points ("insufficient data")
        NumericalError: If unimodality is not reached
    """
    values = np.asarray(values, dtype=float)
    if values.size < MIN_DENSITY_POINTS:
        raise ValidationError(f'insufficient data for density fit ({values.size} < {MIN_DENSITY_POINTS} points)')
    h0 = silverman_bandwidth(values)
    sd = float(np.std(values, ddof=1))
    if sd <= 0:
        # gaussian_kde needs spread; a constant sample becomes a narrow bump
        values = values + np.linspace(-h0, h0, values.size) * 1e-6
        sd = float(np.std(values, ddof=1))
    lo_data, hi_data = float(values.min()), float(values.max())

    for step in range(MAX_WIDEN_STEPS + 1):
        h = h0 * (1.0 + step / 20.0)
        lo = lo_data - 3.0 * h
        if floor is not None:
            lo = max(lo, floor)
        grid = np.linspace(lo, hi_data + 3.0 * h, GRID_POINTS)
        pdf = gaussian_kde(values, bw_method=h / sd)(grid)
        if _count_modes(pdf) == 1:
            pdf = pdf / trapezoid(pdf, grid)
            return UnimodalDensity(grid=grid, pdf=pdf, bandwidth=h, initial_bandwidth=h0, steps=step)
    raise NumericalError(f'Density still multimodal after {MAX_WIDEN_STEPS} bandwidth steps')


@dataclass
class ContinuousMarginal:
    """Composite distribution G_j: mass ``p_floor`` at ``floor`` plus a unimodal density above it."""
    floor: float
    p_floor: float
    density: Optional[UnimodalDensity]

    def ppf(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = np.full(u.shape, self.floor)
        above = u > self.p_floor
        if self.density is not None and np.any(above):
            out[above] = self.density.ppf((u[above] - self.p_floor) / (1.0 - self.p_floor))
        return out

    def to_dict(self) -> Dict:
        return {
            'floor': self.floor,
            'p_floor': self.p_floor,
            'density': None if self.density is None else self.density.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Dict) -> 'ContinuousMarginal':
        density = d.get('density')
        return cls(floor=float(d['floor']), p_floor=float(d['p_floor']),
                   density=None if density is None else UnimodalDensity.from_dict(density))


def fit_continuous_marginal(values: np.ndarray) -> ContinuousMarginal:
    """
    Point mass at the minimum when it occurs at least twice, density fit above it.

    With a point mass of 1 (constant variable) no density is fitted.
    """
    values = np.asarray(values, dtype=float)
    floor = float(values.min())
    at_floor = int(np.sum(values == floor))
    if at_floor >= 2:
        p_floor = at_floor / values.size
        above = values[values > floor]
        density = unimodal_density_fit(above, floor=floor) if above.size else None
        return ContinuousMarginal(floor=floor, p_floor=p_floor, density=density)
    return ContinuousMarginal(floor=floor, p_floor=0.0, density=unimodal_density_fit(values))


@dataclass
class LatentGaussianParams:
    """
    Fitted latent Gaussian model.

    Attributes:
        specs: Variable schema of the fitted data
        sigma: p x p latent correlation matrix
        thresholds: Per variable, interior thresholds in latent category order (None for continuous)
        orderings: Per nominal variable name, level indexes in latent order
        marginals: Per continuous variable name, its composite marginal
        projection_shift: Largest entry change made by the PSD projection
    """
    specs: Tuple[VariableSpec, ...]
    sigma: np.ndarray
    thresholds: Tuple[Optional[np.ndarray], ...]
    orderings: Dict[str, Tuple[int, ...]]
    marginals: Dict[str, ContinuousMarginal]
    projection_shift: float = 0.0

    def __post_init__(self):
        self.specs = tuple(self.specs)
        self.sigma = np.asarray(self.sigma, dtype=float)
        p = len(self.specs)
        if self.sigma.shape != (p, p):
            raise ValidationError(f'Sigma must be {p} x {p}')
        if not np.allclose(np.diag(self.sigma), 1.0) or not np.allclose(self.sigma, self.sigma.T):
            raise ValidationError('Sigma must be a symmetric correlation matrix')
        if np.linalg.eigvalsh(self.sigma).min() < -1e-8:
            raise ValidationError('Sigma must be positive semi-definite')
        self.thresholds = tuple(None if t is None else np.asarray(t, dtype=float) for t in self.thresholds)
        for spec, t in zip(self.specs, self.thresholds):
            if spec.is_categorical:
                if t is None or t.shape != (len(spec.levels) - 1,):
                    raise ValidationError(f'Variable {spec.name!r}: need {len(spec.levels) - 1} thresholds')
                if np.any(np.diff(t) < 0):
                    raise ValidationError(f'Variable {spec.name!r}: thresholds must be nondecreasing')
            elif spec.name not in self.marginals:
                raise ValidationError(f'Variable {spec.name!r}: missing continuous marginal')

    @property
    def p(self) -> int:
        return len(self.specs)

    def to_dict(self) -> Dict:
        return {
            'specs': [spec.to_dict() for spec in self.specs],
            'sigma': self.sigma.tolist(),
            'thresholds': [None if t is None else t.tolist() for t in self.thresholds],
            'orderings': {name: list(order) for name, order in self.orderings.items()},
            'marginals': {name: m.to_dict() for name, m in self.marginals.items()},
            'projection_shift': self.projection_shift,
        }

    @classmethod
    def from_dict(cls, d: Dict) -> 'LatentGaussianParams':
        return cls(
            specs=tuple(VariableSpec.from_dict(s) for s in d['specs']),
            sigma=np.asarray(d['sigma'], dtype=float),
            thresholds=tuple(None if t is None else np.asarray(t, dtype=float) for t in d['thresholds']),
            orderings={name: tuple(int(g) for g in order) for name, order in d['orderings'].items()},
            marginals={name: ContinuousMarginal.from_dict(m) for name, m in d['marginals'].items()},
            projection_shift=float(d.get('projection_shift', 0.0)),
        )


def _quantile_codes(values: np.ndarray, bins: int) -> np.ndarray:
    edges = np.unique(np.quantile(values, np.linspace(0.0, 1.0, bins + 1)[1:-1]))
    codes = np.digitize(values, edges, right=True)
    # drop empty bins so every code is observed
    _, codes = np.unique(codes, return_inverse=True)
    return codes.ravel()


def nearest_correlation(sigma: np.ndarray) -> Tuple[np.ndarray, float]:
    """
    Clip negative eigenvalues and rescale to unit diagonal.

    Returns:
        (projected matrix, largest absolute entry change)
    """
    sigma = (sigma + sigma.T) / 2
    evals, evecs = np.linalg.eigh(sigma)
    if evals.min() >= 0:
        return sigma, 0.0
    clipped = (evecs * np.clip(evals, 0.0, None)) @ evecs.T
    scale = np.sqrt(np.diag(clipped))
    scale[scale == 0] = 1.0
    projected = clipped / np.outer(scale, scale)
    projected = (projected + projected.T) / 2
    np.fill_diagonal(projected, 1.0)
    return projected, float(np.abs(projected - sigma).max())


def estimate_latent_gaussian(data: MixedDataset, cont_bins: int = 10) -> LatentGaussianParams:
    """
    Fit the latent Gaussian model to a mixed dataset.

    Continuous variables are cut into ``cont_bins`` quantile categories for the
    correlation step only; Sigma is assembled from pairwise polychoric
    correlations and projected onto the correlation matrices if it is not
    positive semi-definite.

    Args:
        data: Mixed dataset
        cont_bins: Quantile categories per continuous variable

    Returns:
        LatentGaussianParams
    """
    if cont_bins < 2:
        raise ValidationError('cont_bins must be >= 2')
    orderings: Dict[str, Tuple[int, ...]] = {}
    marginals: Dict[str, ContinuousMarginal] = {}
    thresholds: List[Optional[np.ndarray]] = []
    ordered_codes = []
    for j, spec in enumerate(data.specs):
        if spec.kind == 'continuous':
            column = data.values[:, j]
            marginals[spec.name] = fit_continuous_marginal(column)
            thresholds.append(None)
            ordered_codes.append(_quantile_codes(column, cont_bins))
            continue
        codes = data.column(j)
        if spec.kind == 'nominal':
            order = nominal_ordering(data, j)
            orderings[spec.name] = order
            rank = np.empty(len(order), dtype=int)
            rank[list(order)] = np.arange(len(order))
            codes = rank[codes]
        counts = np.bincount(codes, minlength=len(spec.levels))
        thresholds.append(thresholds_from_counts(counts))
        ordered_codes.append(codes)

    p = data.p
    sigma = np.eye(p)
    for a in range(p):
        for b in range(a + 1, p):
            table = np.zeros((ordered_codes[a].max() + 1, ordered_codes[b].max() + 1))
            np.add.at(table, (ordered_codes[a], ordered_codes[b]), 1.0)
            try:
                rho = polychoric_correlation(table)
            except ValidationError as e:
                raise ValidationError(f'Variables {data.specs[a].name!r}/{data.specs[b].name!r}: {e}') from None
            sigma[a, b] = sigma[b, a] = rho

    sigma, shift = nearest_correlation(sigma)
    if shift > PROJECTION_WARN:
        warnings.warn(f'Positive semi-definite projection moved a correlation by {shift:.3f}',
                      NullbootWarning, stacklevel=2)
    return LatentGaussianParams(specs=data.specs, sigma=sigma, thresholds=tuple(thresholds),
                                orderings=orderings, marginals=marginals, projection_shift=shift)


def latent_factor(sigma: np.ndarray) -> np.ndarray:
    """Symmetric square root via eigendecomposition (works for singular Sigma)."""
    evals, evecs = np.linalg.eigh(sigma)
    return evecs * np.sqrt(np.clip(evals, 0.0, None))


def sample_latent_gaussian(params: LatentGaussianParams, n: int, seed: int) -> MixedDataset:
    """
    Draw n observations from the latent Gaussian model.

    Args:
        params: Fitted model
        n: Number of observations (>= 2)
        seed: Seed of the draw

    Returns:
        MixedDataset with the fitted schema
    """
    if n < 2:
        raise ValidationError('n >= 2 required')
    rng = derive_rng(seed)
    z = rng.standard_normal((n, params.p)) @ latent_factor(params.sigma).T
    values = np.empty((n, params.p))
    for j, spec in enumerate(params.specs):
        if spec.kind == 'continuous':
            values[:, j] = params.marginals[spec.name].ppf(norm.cdf(z[:, j]))
            continue
        codes = np.searchsorted(params.thresholds[j], z[:, j], side='left')
        if spec.kind == 'nominal':
            codes = np.asarray(params.orderings[spec.name])[codes]
        values[:, j] = codes
    return MixedDataset(specs=params.specs, values=values)


def summarize_latent(params: LatentGaussianParams) -> Dict:
    """Estimation diagnostics for reports."""
    evals = np.linalg.eigvalsh(params.sigma)
    positive = evals[evals > 0]
    return {
        'p': params.p,
        'sigma_condition_number': float(positive.max() / positive.min()) if positive.size == params.p else float('inf'),
        'projection_shift': params.projection_shift,
        'nominal_orderings': {
            spec.name: [spec.levels[g] for g in params.orderings[spec.name]]
            for spec in params.specs if spec.name in params.orderings
        },
        'floor_masses': {name: m.p_floor for name, m in params.marginals.items()},
        'bandwidth_steps': {
            name: m.density.steps for name, m in params.marginals.items() if m.density is not None
        },
    }
