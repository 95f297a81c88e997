"""Internal clustering-quality indices.

All three indices use Euclidean geometry on the representation that was
clustered.  Degenerate inputs (too few or too many clusters, coincident
centroids, zero within-cluster dispersion) raise
:class:`DegenerateClusteringError` instead of returning NaN or infinity.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .tensor import as_dense

__all__ = [
    "DegenerateClusteringError",
    "MetricsReport",
    "silhouette",
    "davies_bouldin",
    "calinski_harabasz",
    "evaluate",
    "pairwise_distances",
]

# above this width the Gram expansion is used for pairwise distances
_DIRECT_MAX_DIM = 64
_BLOCK = 1024


class DegenerateClusteringError(ValueError):
    pass


@dataclass
class MetricsReport:
    silhouette: float
    davies_bouldin: float
    calinski_harabasz: float
    n: int
    k: int

    def to_dict(self) -> dict:
        return asdict(self)


def _prepare(M, labels):
    M = as_dense(M)
    labels = np.asarray(labels)
    if labels.shape != (M.shape[0],):
        raise ValueError(f"expected {M.shape[0]} labels, got shape {labels.shape}")
    _, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    return M, inverse.ravel(), counts


def _centroids(M, inverse, k):
    sums = np.zeros((k, M.shape[1]))
    np.add.at(sums, inverse, M)
    return sums / np.bincount(inverse, minlength=k)[:, None]


def pairwise_distances(M: np.ndarray, lo: int = 0, hi: int | None = None) -> np.ndarray:
    """Euclidean distances from rows ``lo:hi`` of ``M`` to every row.

    Narrow inputs use direct differences (exact zeros for duplicates); wide
    inputs use the Gram expansion, which is exact for integer features.
    """
    hi = M.shape[0] if hi is None else hi
    if M.shape[1] <= _DIRECT_MAX_DIM:
        return cdist(M[lo:hi], M)
    sq = np.einsum("ij,ij->i", M, M)
    d2 = sq[lo:hi, None] + sq[None, :] - 2.0 * (M[lo:hi] @ M.T)
    np.maximum(d2, 0.0, out=d2)
    d2[np.arange(hi - lo), np.arange(lo, hi)] = 0.0
    return np.sqrt(d2)


def silhouette(M, labels) -> float:
    """Mean silhouette ``(b - a) / max(a, b)`` over all samples.

    ``a`` is the mean distance to the other members of the sample's cluster and
    ``b`` the smallest mean distance to the members of another cluster.
    Samples in singleton clusters score 0.
    """
    M, inverse, counts = _prepare(M, labels)
    n, k = M.shape[0], counts.size
    if not 2 <= k <= n - 1:
        raise DegenerateClusteringError(f"silhouette needs 2 <= k <= n-1 (k={k}, n={n})")
    onehot = np.zeros((n, k))
    onehot[np.arange(n), inverse] = 1.0
    s = np.zeros(n)
    for lo in range(0, n, _BLOCK):
        hi = min(n, lo + _BLOCK)
        sums = pairwise_distances(M, lo, hi) @ onehot  # (block, k)
        rows = np.arange(hi - lo)
        own = inverse[lo:hi]
        own_size = counts[own]
        a = sums[rows, own] / np.maximum(own_size - 1, 1)
        other = sums / counts[None, :]
        other[rows, own] = np.inf
        b = other.min(axis=1)
        denom = np.maximum(a, b)
        with np.errstate(invalid="ignore", divide="ignore"):
            si = np.where(denom > 0, (b - a) / denom, 0.0)
        s[lo:hi] = np.where(own_size > 1, si, 0.0)
    return float(s.mean())


def davies_bouldin(M, labels) -> float:
    """Mean over clusters of the worst ``(s_i + s_j) / d(c_i, c_j)`` ratio.

    ``s_i`` is the mean distance of cluster i's members to its centroid.
    """
    M, inverse, counts = _prepare(M, labels)
    n, k = M.shape[0], counts.size
    if not 2 <= k <= n:
        raise DegenerateClusteringError(f"Davies-Bouldin needs 2 <= k <= n (k={k}, n={n})")
    C = _centroids(M, inverse, k)
    spread = np.zeros(k)
    np.add.at(spread, inverse, np.linalg.norm(M - C[inverse], axis=1))
    spread /= counts
    sep = cdist(C, C)
    off = ~np.eye(k, dtype=bool)
    if np.any(sep[off] == 0):
        raise DegenerateClusteringError("two clusters share the same centroid")
    ratio = np.where(off, (spread[:, None] + spread[None, :]) / np.where(off, sep, 1.0), -np.inf)
    return float(ratio.max(axis=1).mean())


def calinski_harabasz(M, labels) -> float:
    """Variance-ratio criterion ``[tr(B)/(k-1)] / [tr(W)/(n-k)]``."""
    M, inverse, counts = _prepare(M, labels)
    n, k = M.shape[0], counts.size
    if not 2 <= k <= n - 1:
        raise DegenerateClusteringError(f"Calinski-Harabasz needs 2 <= k <= n-1 (k={k}, n={n})")
    C = _centroids(M, inverse, k)
    mean = M.mean(axis=0)
    between = float(np.sum(counts * np.sum((C - mean) ** 2, axis=1)))
    within = float(np.sum((M - C[inverse]) ** 2))
    if within == 0:
        raise DegenerateClusteringError("zero within-cluster dispersion")
    return (between / (k - 1)) / (within / (n - k))


def evaluate(M, labels) -> MetricsReport:
    M, inverse, counts = _prepare(M, labels)
    return MetricsReport(
        silhouette=silhouette(M, inverse),
        davies_bouldin=davies_bouldin(M, inverse),
        calinski_harabasz=calinski_harabasz(M, inverse),
        n=int(M.shape[0]),
        k=int(counts.size),
    )
