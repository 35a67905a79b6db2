"""
Cluster validation indexes: average silhouette width, prediction strength and BIC.

All indexes are oriented so that larger values mean better clustering.
"""

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Union

import numpy as np

from .clustering import cut_tree, linkage_cluster, pam
from .data import DissimilarityMatrix, NOISE, Partition, PointCloud, ValidationError
from .dissimilarity import euclidean_matrix
from .mixture import GmmFit
from .seeds import derive_seed


PS_METHODS = ('pam', 'average', 'complete')

# Decision threshold of the classic prediction strength rule
PS_THRESHOLD = 0.8


def asw(D: DissimilarityMatrix, part: Partition) -> float:
    """
    Average silhouette width of a partition.

    s(i) = (b(i) - a(i)) / max(a(i), b(i)), with s(i) = 0 for objects in singleton
    clusters. Noise objects are left out entirely.

    Raises:
        ValidationError: If the partition has fewer than 2 clusters or does not match D
    """
    if part.k < 2:
        raise ValidationError('ASW needs k >= 2')
    if part.n != D.n:
        raise ValidationError('Partition and dissimilarity matrix sizes differ')
    keep = np.flatnonzero(part.labels != NOISE)
    d = D.values[np.ix_(keep, keep)]
    labels = part.labels[keep]
    clusters = np.arange(1, part.k + 1)
    onehot = (labels[:, None] == clusters[None, :]).astype(float)
    sizes = onehot.sum(axis=0)
    sums = d @ onehot
    own = labels - 1
    own_size = sizes[own]

    with np.errstate(divide='ignore', invalid='ignore'):
        a = sums[np.arange(labels.size), own] / (own_size - 1)
        means = sums / sizes[None, :]
    means[np.arange(labels.size), own] = np.inf
    means[:, sizes == 0] = np.inf
    b = means.min(axis=1)

    s = np.zeros(labels.size)
    regular = own_size > 1
    denom = np.maximum(a, b)
    ok = regular & (denom > 0)
    s[ok] = (b[ok] - a[ok]) / denom[ok]
    return float(s.mean())


@dataclass(frozen=True)
class PredictionStrengthConfig:
    """
    Settings for prediction strength.

    Attributes:
        b: Number of random half-splits
        method: Clustering method applied to each half ('pam', 'average', 'complete')
        seed: Seed from which every split is derived
    """
    b: int = 50
    method: str = 'pam'
    seed: int = 0

    def __post_init__(self):
        if self.b < 1:
            raise ValidationError('b must be >= 1')
        if self.method not in PS_METHODS:
            raise ValidationError(f'Invalid prediction strength method: {self.method} (must be one of {PS_METHODS})')


def _cluster_half(D: DissimilarityMatrix, ks, method: str) -> Dict[int, Partition]:
    if method == 'pam':
        return {k: pam(D, k) for k in ks}
    tree = linkage_cluster(D, method)
    return {k: cut_tree(tree, k) for k in ks}


def _predict(d_cross: np.ndarray, train: Partition, method: str) -> np.ndarray:
    """Assign test objects (rows of d_cross) to the training clusters (columns)."""
    if method == 'pam':
        return np.argmin(d_cross[:, list(train.medoids)], axis=1) + 1
    scores = np.empty((d_cross.shape[0], train.k))
    for c in range(1, train.k + 1):
        block = d_cross[:, train.members(c)]
        scores[:, c - 1] = block.mean(axis=1) if method == 'average' else block.max(axis=1)
    return np.argmin(scores, axis=1) + 1


def _weakest_cluster_strength(test: Partition, predicted: np.ndarray) -> float:
    worst = 1.0
    for c in range(1, test.k + 1):
        members = predicted[test.labels == c]
        size = members.size
        if size < 2:
            continue
        _, counts = np.unique(members, return_counts=True)
        agreeing = float((counts * (counts - 1)).sum()) / 2
        worst = min(worst, agreeing / (size * (size - 1) / 2))
    return worst


def prediction_strength_profile(D: Union[DissimilarityMatrix, PointCloud, np.ndarray],
                                ks: Iterable[int],
                                cfg: Optional[PredictionStrengthConfig] = None) -> Dict[int, float]:
    """
    Prediction strength for several k, sharing the same b half-splits.

    For each split both halves are clustered; each half's co-memberships are then
    checked against the prediction made by the other half's clustering (closest
    medoid for PAM, minimum average distance for average linkage, minimax distance
    for complete linkage). A split contributes the weakest cluster's proportion of
    correctly predicted pairs; clusters with fewer than two members count as 1.

    Args:
        D: Dissimilarity matrix, PointCloud or raw coordinates (Euclidean)
        ks: Cluster counts, each 2 <= k <= floor(n / 2)
        cfg: Prediction strength settings

    Returns:
        Mapping k -> mean over the 2b (half, clustering) evaluations
    """
    cfg = cfg or PredictionStrengthConfig()
    if isinstance(D, np.ndarray):
        D = PointCloud(D)
    if isinstance(D, PointCloud):
        D = euclidean_matrix(D)
    ks = sorted(set(int(k) for k in ks))
    n = D.n
    if n < 4:
        raise ValidationError('Prediction strength needs n >= 4')
    if not ks or ks[0] < 2 or ks[-1] > n // 2:
        raise ValidationError(f'Prediction strength needs 2 <= k <= {n // 2} (got {ks})')

    totals = {k: 0.0 for k in ks}
    for split in range(cfg.b):
        rng = np.random.default_rng(derive_seed(cfg.seed, split))
        order = rng.permutation(n)
        halves = (np.sort(order[:n // 2]), np.sort(order[n // 2:]))
        clusterings = [_cluster_half(D.subset(half), ks, cfg.method) for half in halves]
        for test_side in (0, 1):
            train_side = 1 - test_side
            d_cross = D.values[np.ix_(halves[test_side], halves[train_side])]
            for k in ks:
                predicted = _predict(d_cross, clusterings[train_side][k], cfg.method)
                totals[k] += _weakest_cluster_strength(clusterings[test_side][k], predicted)
    return {k: totals[k] / (2 * cfg.b) for k in ks}


def prediction_strength(D: Union[DissimilarityMatrix, PointCloud, np.ndarray], k: int,
                        cfg: Optional[PredictionStrengthConfig] = None) -> float:
    """Prediction strength of a k-cluster solution, in [0, 1]."""
    return prediction_strength_profile(D, [k], cfg)[k]


def largest_stable_k(profile: Dict[int, float], threshold: float = PS_THRESHOLD) -> Optional[int]:
    """Classic rule: the largest k whose prediction strength exceeds the threshold."""
    stable = [k for k, value in profile.items() if value > threshold]
    return max(stable) if stable else None


def bic(fit: GmmFit, n: Optional[int] = None) -> float:
    """BIC oriented so that larger is better: 2 l_n(k) - r(k) log(n)."""
    n = fit.n if n is None else n
    return 2.0 * fit.loglik - fit.n_params * math.log(n)


def adjusted_bic_profile(bics: Dict[int, float], signed: bool = False) -> Dict[int, float]:
    """
    BIC profile relative to the one-component fit.

    By default V(k) = (BIC(k) - BIC(1)) / |BIC(1)|, so larger V always means
    stronger clustering. With ``signed=True`` the divisor is BIC(1) itself, which
    flips the orientation whenever BIC(1) < 0.

    Raises:
        ValidationError: If BIC(1) is missing or zero
    """
    if 1 not in bics:
        raise ValidationError('Adjusted BIC needs the k=1 entry')
    base = bics[1]
    if base == 0:
        raise ValidationError('Adjusted BIC undefined for BIC(1) = 0')
    divisor = base if signed else abs(base)
    return {k: (value - base) / divisor for k, value in bics.items()}
