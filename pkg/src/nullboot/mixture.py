"""
Gaussian mixture fitting by EM, optionally with a uniform noise component.

Component covariances are unconstrained. The noise component has constant
density 1 / volume of the bounding hyperbox of the data.
"""

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp
from scipy.spatial.distance import pdist, squareform

from .clustering import pam
from .data import DissimilarityMatrix, NOISE, NullbootWarning, NumericalError, ValidationError


# Share of points with the largest nearest-neighbor distance initialised as noise
NOISE_INIT_FRACTION = 0.05


@dataclass
class GmmFit:
    """
    Result of a Gaussian mixture fit.

    Attributes:
        k: Number of Gaussian components
        weights: Mixing proportions, noise proportion last when present
        means: k x q component means
        covariances: k x q x q component covariances
        noise_density: Constant noise density (0 without noise)
        loglik: Maximised log-likelihood l_n(k)
        n_params: Free parameter count r(k)
        responsibilities: n x (k [+1]) posterior probabilities
        n: Number of observations
        n_iter: EM iterations of the kept restart
        converged: Whether the relative loglik change fell below tol
        regularized: Whether an eigenvalue floor was applied to some covariance
        loglik_trace: Loglik after each EM iteration of the kept restart
        restart: Index of the kept restart
    """
    k: int
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    noise_density: float
    loglik: float
    n_params: int
    responsibilities: np.ndarray
    n: int
    n_iter: int = 0
    converged: bool = False
    regularized: bool = False
    loglik_trace: List[float] = field(default_factory=list)
    restart: int = 0

    @property
    def with_noise(self) -> bool:
        return self.noise_density > 0

    def classification(self) -> np.ndarray:
        """MAP labels 1..k, ``NOISE`` for points assigned to the noise component."""
        labels = np.argmax(self.responsibilities, axis=1) + 1
        if self.with_noise:
            labels[labels == self.k + 1] = NOISE
        return labels

    def to_dict(self) -> Dict:
        return {
            'k': self.k,
            'weights': self.weights.tolist(),
            'means': self.means.tolist(),
            'covariances': self.covariances.tolist(),
            'noise_density': self.noise_density,
            'loglik': self.loglik,
            'n_params': self.n_params,
            'n': self.n,
            'n_iter': self.n_iter,
            'converged': self.converged,
            'regularized': self.regularized,
            'restart': self.restart,
        }


def n_parameters(k: int, q: int, with_noise: bool) -> int:
    """Free parameters: (k-1) proportions + kq means + k q(q+1)/2 covariances (+1 with noise)."""
    return (k - 1) + k * q + k * q * (q + 1) // 2 + (1 if with_noise else 0)


def hyperbox_density(Y: np.ndarray) -> float:
    """Reciprocal volume of the bounding hyperbox of Y."""
    widths = Y.max(axis=0) - Y.min(axis=0)
    if np.any(widths <= 0):
        raise NumericalError('Bounding hyperbox has zero volume; noise density undefined')
    return float(np.exp(-np.log(widths).sum()))


def _log_gaussian(Y: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise NumericalError('Component covariance is not positive definite') from None
    z = np.linalg.solve(chol, (Y - mean).T)
    q = Y.shape[1]
    return -0.5 * (z ** 2).sum(axis=0) - np.log(np.diag(chol)).sum() - 0.5 * q * np.log(2 * np.pi)


def _m_step(Y: np.ndarray, resp: np.ndarray, k: int, floor: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    n, q = Y.shape
    totals = resp.sum(axis=0)
    if np.any(totals[:k] < 1e-8 * n):
        raise NumericalError('A mixture component lost all its points')
    weights = totals / n
    means = (resp[:, :k].T @ Y) / totals[:k, None]
    covariances = np.empty((k, q, q))
    regularized = False
    for c in range(k):
        centred = Y - means[c]
        cov = (resp[:, c, None] * centred).T @ centred / totals[c]
        cov = (cov + cov.T) / 2
        evals, evecs = np.linalg.eigh(cov)
        if evals.min() < floor:
            regularized = True
            cov = (evecs * np.maximum(evals, floor)) @ evecs.T
            cov = (cov + cov.T) / 2
        covariances[c] = cov
    return weights, means, covariances, regularized


def _e_step(Y, weights, means, covariances, noise_density) -> Tuple[np.ndarray, float]:
    k = means.shape[0]
    columns = [np.log(weights[c]) + _log_gaussian(Y, means[c], covariances[c]) for c in range(k)]
    if noise_density > 0:
        columns.append(np.full(Y.shape[0], np.log(weights[k]) + np.log(noise_density)))
    log_joint = np.column_stack(columns)
    log_marginal = logsumexp(log_joint, axis=1)
    resp = np.exp(log_joint - log_marginal[:, None])
    resp /= resp.sum(axis=1, keepdims=True)
    return resp, float(log_marginal.sum())


def _noise_mask(Y: np.ndarray) -> np.ndarray:
    d = squareform(pdist(Y))
    np.fill_diagonal(d, np.inf)
    nearest = d.min(axis=1)
    n_noise = max(1, int(round(NOISE_INIT_FRACTION * Y.shape[0])))
    mask = np.zeros(Y.shape[0], dtype=bool)
    mask[np.argsort(-nearest, kind='stable')[:n_noise]] = True
    return mask


def _initial_responsibilities(Y: np.ndarray, k: int, with_noise: bool, restart: int,
                              rng: np.random.Generator) -> np.ndarray:
    n = Y.shape[0]
    width = k + 1 if with_noise else k
    resp = np.zeros((n, width))
    noise = _noise_mask(Y) if with_noise else np.zeros(n, dtype=bool)
    signal = np.flatnonzero(~noise)
    if restart == 0:
        if k == 1:
            resp[signal, 0] = 1.0
        else:
            D = DissimilarityMatrix(squareform(pdist(Y[signal])))
            labels = pam(D, k).labels
            resp[signal, labels - 1] = 1.0
    else:
        resp[signal, :k] = rng.dirichlet(np.ones(k), size=signal.size)
    if with_noise:
        resp[noise, k] = 1.0
    return resp


def _run_em(Y, k, with_noise, noise_density, resp, max_iter, tol, floor):
    trace = []
    regularized = False
    loglik = -np.inf
    converged = False
    for iteration in range(1, max_iter + 1):
        weights, means, covariances, floored = _m_step(Y, resp, k, floor)
        regularized = regularized or floored
        resp, new_loglik = _e_step(Y, weights, means, covariances, noise_density)
        trace.append(new_loglik)
        if np.isfinite(loglik) and abs(new_loglik - loglik) < tol * abs(loglik):
            loglik = new_loglik
            converged = True
            break
        loglik = new_loglik
    return weights, means, covariances, resp, loglik, trace, iteration, converged, regularized


def gmm_noise_fit(Y: np.ndarray, k: int, with_noise: bool = False, restarts: int = 10,
                  max_iter: int = 500, tol: float = 1e-8, seed: Optional[int] = None,
                  floor_factor: float = 1e-8) -> GmmFit:
    """
    Fit a k-component Gaussian mixture, optionally with a uniform noise component.

    The first restart is seeded from a k-medoids partition of the non-noise points,
    the others from random responsibilities; the restart with the highest loglik
    wins, ties going to the lower restart index.

    Args:
        Y: n x q coordinates with n > q + 1
        k: Number of Gaussian components, k >= 1
        with_noise: Add a uniform noise component over the bounding hyperbox
        restarts: Number of EM initialisations
        max_iter: Maximum EM iterations per restart
        tol: Relative loglik change below which EM stops
        seed: Seed for the random restarts
        floor_factor: Covariance eigenvalue floor as a multiple of the mean variance of Y

    Returns:
        GmmFit of the best restart

    Raises:
        ValidationError: On invalid k or too few observations
        NumericalError: If every restart degenerates
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, q = Y.shape
    if k < 1:
        raise ValidationError('k must be >= 1')
    if n <= q + 1:
        raise ValidationError(f'n > q + 1 required (n={n}, q={q})')
    if restarts < 1:
        raise ValidationError('restarts must be >= 1')

    noise_density = hyperbox_density(Y) if with_noise else 0.0
    mean_variance = float(np.mean(np.var(Y, axis=0)))
    floor = floor_factor * (mean_variance if mean_variance > 0 else 1.0)
    rng = np.random.default_rng(seed)

    best = None
    failures = []
    for restart in range(restarts):
        try:
            resp = _initial_responsibilities(Y, k, with_noise, restart, rng)
            result = _run_em(Y, k, with_noise, noise_density, resp, max_iter, tol, floor)
        except (NumericalError, ValidationError) as e:
            failures.append(f'restart {restart}: {e}')
            continue
        if best is None or result[4] > best[1][4]:
            best = (restart, result)
    if best is None:
        raise NumericalError(f'All {restarts} EM restarts failed ({"; ".join(failures)})')

    restart, (weights, means, covariances, resp, loglik, trace, n_iter, converged, regularized) = best
    if regularized:
        warnings.warn(f'Covariance eigenvalue floor applied in {k}-component fit', NullbootWarning, stacklevel=2)
    return GmmFit(
        k=k,
        weights=weights,
        means=means,
        covariances=covariances,
        noise_density=noise_density,
        loglik=loglik,
        n_params=n_parameters(k, q, with_noise),
        responsibilities=resp,
        n=n,
        n_iter=n_iter,
        converged=converged,
        regularized=regularized,
        loglik_trace=trace,
        restart=restart,
    )
