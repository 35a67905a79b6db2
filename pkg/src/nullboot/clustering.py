"""
Distance-based clustering: PAM, average/complete linkage and classical MDS.

Ties are always broken towards the lowest index so results are reproducible.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.cluster.hierarchy import linkage
from scipy.spatial.distance import squareform

from .data import DissimilarityMatrix, Partition, ValidationError


LINKAGE_METHODS = ('average', 'complete')


def pam_objective(D: DissimilarityMatrix, medoids) -> float:
    """Sum of distances of every object to its nearest medoid."""
    return float(D.values[:, list(medoids)].min(axis=1).sum())


def _build(d: np.ndarray, k: int) -> list:
    medoids = [int(np.argmin(d.sum(axis=0)))]
    nearest = d[:, medoids[0]].copy()
    for _ in range(1, k):
        gain = np.maximum(nearest[:, None] - d, 0.0).sum(axis=0)
        gain[medoids] = -np.inf
        chosen = int(np.argmax(gain))
        medoids.append(chosen)
        nearest = np.minimum(nearest, d[:, chosen])
    return medoids


def pam(D: DissimilarityMatrix, k: int, max_iter: int = 1000) -> Partition:
    """
    Partitioning Around Medoids (BUILD followed by SWAP to a local optimum).

    The returned objective cannot be improved by any single medoid/non-medoid swap.

    Args:
        D: Dissimilarity matrix
        k: Number of clusters, 2 <= k <= n
        max_iter: Bound on the number of accepted swaps

    Returns:
        Partition with medoids sorted by object index; medoid i carries label i + 1

    Raises:
        ValidationError: If k is out of range
    """
    n = D.n
    if not 2 <= k <= n:
        raise ValidationError(f'k must satisfy 2 <= k <= n (got k={k}, n={n})')
    d = D.values
    medoids = _build(d, k)
    cost = float(d[:, medoids].min(axis=1).sum())
    tolerance = 1e-10 * max(1.0, float(d.max()))

    for _ in range(max_iter):
        best_cost, best_swap = cost, None
        is_medoid = np.zeros(n, dtype=bool)
        is_medoid[medoids] = True
        for pos in np.argsort(medoids, kind='stable'):
            others = [m for i, m in enumerate(medoids) if i != pos]
            without = d[:, others].min(axis=1) if others else np.full(n, np.inf)
            # cost of replacing medoids[pos] by each candidate object
            costs = np.minimum(without[:, None], d).sum(axis=0)
            costs[is_medoid] = np.inf
            candidate = int(np.argmin(costs))
            if costs[candidate] < best_cost - tolerance:
                best_cost, best_swap = float(costs[candidate]), (pos, candidate)
        if best_swap is None:
            break
        pos, candidate = best_swap
        medoids[pos] = candidate
        cost = best_cost

    medoids = sorted(medoids)
    labels = np.argmin(d[:, medoids], axis=1) + 1
    labels[medoids] = np.arange(1, k + 1)
    return Partition(labels=labels, k=k, medoids=tuple(medoids))


@dataclass(frozen=True)
class DendrogramModel:
    """
    Agglomerative merge history in SciPy linkage format.

    Row i of ``merges`` is (cluster_a, cluster_b, height, size); ids below n are
    objects, id n + i is the cluster formed at step i.
    """
    merges: np.ndarray
    method: str

    @property
    def n(self) -> int:
        return self.merges.shape[0] + 1

    @property
    def heights(self) -> np.ndarray:
        return self.merges[:, 2]

    def triples(self) -> Tuple[Tuple[int, int, float], ...]:
        return tuple((int(a), int(b), float(h)) for a, b, h, _ in self.merges)


def linkage_cluster(D: DissimilarityMatrix, method: str = 'average') -> DendrogramModel:
    """
    Average or complete linkage hierarchical clustering.

    Args:
        D: Dissimilarity matrix with n >= 2
        method: 'average' (mean inter-cluster dissimilarity) or 'complete' (maximum)

    Raises:
        ValidationError: On an unknown method or n < 2
    """
    if method not in LINKAGE_METHODS:
        raise ValidationError(f'Invalid linkage method: {method} (must be one of {LINKAGE_METHODS})')
    if D.n < 2:
        raise ValidationError('n >= 2 required')
    merges = linkage(squareform(D.values, checks=False), method=method)
    return DendrogramModel(merges=merges, method=method)


def cut_tree(tree: DendrogramModel, k: int) -> Partition:
    """
    Partition into exactly k clusters by undoing the last n - k merges.

    Raises:
        ValidationError: If k is out of range
    """
    n = tree.n
    if not 1 <= k <= n:
        raise ValidationError(f'k must satisfy 1 <= k <= n (got k={k}, n={n})')
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for step in range(n - k):
        a, b = int(tree.merges[step, 0]), int(tree.merges[step, 1])
        parent[find(a)] = n + step
        parent[find(b)] = n + step
    return Partition.from_labels(find(i) for i in range(n))


def classical_mds(D: DissimilarityMatrix, q: int) -> np.ndarray:
    """
    Classical (Torgerson) multidimensional scaling.

    Double-centres -D^2/2 and keeps the top-q eigenpairs; a non-positive eigenvalue
    among them yields a zero column. Each column's sign is fixed so that its
    largest-magnitude entry is positive.

    Args:
        D: Dissimilarity matrix
        q: Target dimension, 1 <= q <= n - 1

    Returns:
        n x q coordinates, columns ordered by descending eigenvalue

    Raises:
        ValidationError: If q is out of range
    """
    n = D.n
    if not 1 <= q <= n - 1:
        raise ValidationError(f'q must satisfy 1 <= q <= n - 1 (got q={q}, n={n})')
    H = np.eye(n) - np.ones((n, n)) / n
    B = -H @ (D.values ** 2) @ H / 2
    evals, evecs = np.linalg.eigh((B + B.T) / 2)
    order = np.argsort(evals, kind='stable')[::-1][:q]
    evals, evecs = evals[order], evecs[:, order]
    coords = evecs * np.sqrt(np.clip(evals, 0.0, None))
    for j in range(q):
        pivot = np.argmax(np.abs(coords[:, j]))
        if coords[pivot, j] < 0:
            coords[:, j] = -coords[:, j]
    return coords
