"""
Two-step polychoric correlation: thresholds from the margins, then a one-dimensional
likelihood search for the latent correlation.
"""

from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad_vec
from scipy.optimize import minimize_scalar
from scipy.stats import norm

from .data import ValidationError


RHO_BOUND = 0.999

# Standard normal cdf is exactly 0/1 in double precision beyond this
_CLIP = 38.0


def thresholds_from_counts(counts: Sequence[float]) -> np.ndarray:
    """
    Interior thresholds u_1 <= ... <= u_{h-1} reproducing the marginal frequencies.

    u_g = Phi^-1(cumulative frequency of categories 1..g).
    """
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise ValidationError('Marginal counts must have a positive total')
    cumulative = np.cumsum(counts)[:-1] / total
    return norm.ppf(np.clip(cumulative, 0.0, 1.0))


def bivariate_normal_cdf(h, k, rho: float) -> np.ndarray:
    """
    P(Z1 <= h, Z2 <= k) for standard bivariate normal with correlation rho.

    Uses Plackett's identity Phi2(h, k; rho) = Phi(h) Phi(k) + int_0^rho phi2(h, k; r) dr
    with vectorised adaptive quadrature (absolute accuracy 1e-12).
    """
    h = np.clip(np.asarray(h, dtype=float), -_CLIP, _CLIP)
    k = np.clip(np.asarray(k, dtype=float), -_CLIP, _CLIP)
    h, k = np.broadcast_arrays(h, k)
    base = norm.cdf(h) * norm.cdf(k)
    if rho == 0:
        return base

    def density(r):
        one_minus = 1.0 - r * r
        return np.exp(-(h * h - 2.0 * r * h * k + k * k) / (2.0 * one_minus)) / (2.0 * np.pi * np.sqrt(one_minus))

    integral, _ = quad_vec(density, 0.0, rho, epsabs=1e-12, epsrel=1e-10)
    return base + integral


def cell_probabilities(thresholds_a: np.ndarray, thresholds_b: np.ndarray, rho: float) -> np.ndarray:
    """Rectangle probabilities of the latent bivariate normal for every table cell."""
    a = np.concatenate(([-np.inf], thresholds_a, [np.inf]))
    b = np.concatenate(([-np.inf], thresholds_b, [np.inf]))
    grid = bivariate_normal_cdf(a[:, None], b[None, :], rho)
    cells = grid[1:, 1:] - grid[:-1, 1:] - grid[1:, :-1] + grid[:-1, :-1]
    return np.clip(cells, 0.0, None)


def polychoric_loglik(table: np.ndarray, thresholds_a: np.ndarray, thresholds_b: np.ndarray, rho: float) -> float:
    cells = cell_probabilities(thresholds_a, thresholds_b, rho)
    observed = table > 0
    return float((table[observed] * np.log(np.maximum(cells[observed], 1e-300))).sum())


def polychoric_correlation(table, thresholds_a: Optional[Sequence[float]] = None,
                           thresholds_b: Optional[Sequence[float]] = None) -> float:
    """
    Latent correlation of two ordinal variables from their contingency table.

    Args:
        table: r x c table of counts (rows: categories of the first variable)
        thresholds_a: r - 1 interior thresholds (default: from the row margins)
        thresholds_b: c - 1 interior thresholds (default: from the column margins)

    Returns:
        Maximum likelihood correlation in [-0.999, 0.999]

    Raises:
        ValidationError: If the table is invalid or concentrated in one row or column
    """
    table = np.asarray(table, dtype=float)
    if table.ndim != 2 or np.any(table < 0) or not np.all(np.isfinite(table)):
        raise ValidationError('Contingency table must be a 2-D array of nonnegative counts')
    if table.sum() <= 0:
        raise ValidationError('Contingency table must have a positive total')
    if (table.sum(axis=1) > 0).sum() < 2 or (table.sum(axis=0) > 0).sum() < 2:
        raise ValidationError('Correlation undefined: table concentrated in one row or column')

    ta = thresholds_from_counts(table.sum(axis=1)) if thresholds_a is None else np.asarray(thresholds_a, dtype=float)
    tb = thresholds_from_counts(table.sum(axis=0)) if thresholds_b is None else np.asarray(thresholds_b, dtype=float)
    if ta.shape != (table.shape[0] - 1,) or tb.shape != (table.shape[1] - 1,):
        raise ValidationError('Threshold counts do not match the table dimensions')
    if np.any(np.diff(ta) < 0) or np.any(np.diff(tb) < 0):
        raise ValidationError('Thresholds must be nondecreasing')

    def objective(rho):
        return -polychoric_loglik(table, ta, tb, rho)

    found = minimize_scalar(objective, bounds=(-RHO_BOUND, RHO_BOUND), method='bounded',
                            options={'xatol': 1e-7})
    candidates = [(found.fun, float(found.x)), (objective(-RHO_BOUND), -RHO_BOUND), (objective(RHO_BOUND), RHO_BOUND)]
    return min(candidates)[1]
