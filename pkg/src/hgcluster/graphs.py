"""KNN graphs, KNN hypergraphs and their normalized propagation operators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .tensor import as_csr, as_dense, csr_from_coo

__all__ = [
    "KnnConfig",
    "Hypergraph",
    "knn_neighbors",
    "knn_graph",
    "knn_hypergraph",
    "hypergraph_from_adjacency",
    "graph_operator",
    "hypergraph_operator",
    "check_adjacency",
]

METRICS = ("euclidean", "cosine")

# rows per block when scanning the n x n distance matrix
_BLOCK = 512


@dataclass(frozen=True)
class KnnConfig:
    k: int = 5
    metric: str = "euclidean"

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")

    def validate(self, n: int) -> None:
        if n < 2:
            raise ValueError(f"need at least 2 samples, got {n}")
        if self.k >= n:
            raise ValueError(f"k={self.k} must be smaller than the number of samples n={n}")


@dataclass
class Hypergraph:
    """Binary incidence matrix (vertices x hyperedges) plus positive edge weights."""

    incidence: sp.csr_array
    edge_weights: np.ndarray = field(default=None)

    def __post_init__(self):
        H = as_csr(self.incidence)
        if not np.all(H.data == 1.0):
            raise ValueError("incidence entries must be 0 or 1")
        m = H.shape[1]
        if self.edge_weights is None:
            w = np.ones(m)
        else:
            w = np.asarray(self.edge_weights, dtype=np.float64)
        if w.shape != (m,):
            raise ValueError(f"expected {m} edge weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("edge weights must be finite and positive")
        if np.any(np.diff(H.tocsc().indptr) == 0):
            raise ValueError("every hyperedge must contain at least one vertex")
        self.incidence = H
        self.edge_weights = w

    @property
    def n_vertices(self) -> int:
        return self.incidence.shape[0]

    @property
    def n_edges(self) -> int:
        return self.incidence.shape[1]


def _block_distances(X: np.ndarray, sq: np.ndarray, lo: int, hi: int, metric: str) -> np.ndarray:
    G = X[lo:hi] @ X.T
    if metric == "euclidean":
        d = sq[lo:hi, None] + sq[None, :] - 2.0 * G
        np.maximum(d, 0.0, out=d)
        return d
    norms = np.sqrt(sq)
    denom = norms[lo:hi, None] * norms[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = np.where(denom > 0, G / denom, 0.0)
    return 1.0 - cos


def knn_neighbors(X, k: int = 5, metric: str = "euclidean") -> np.ndarray:
    """Exact k nearest neighbours of every row of ``X``.

    The query point is never its own neighbour.  Distance ties are broken by
    the lower vertex index.  Euclidean distances are ranked through their
    squares, which preserves the order.

    Returns
    -------
    ndarray of shape (n, k)
        ``out[i]`` lists the neighbours of ``i`` from nearest to farthest.
    """
    X = as_dense(X)
    n = X.shape[0]
    KnnConfig(k, metric).validate(n)
    sq = np.einsum("ij,ij->i", X, X)
    out = np.empty((n, k), dtype=np.int64)
    for lo in range(0, n, _BLOCK):
        hi = min(n, lo + _BLOCK)
        d = _block_distances(X, sq, lo, hi, metric)
        d[np.arange(hi - lo), np.arange(lo, hi)] = np.inf
        # stable sort keeps equal distances in ascending column order
        order = np.argsort(d, axis=1, kind="stable")
        out[lo:hi] = order[:, :k]
    return out


def _symmetrize_neighbors(nbrs: np.ndarray) -> sp.csr_array:
    n, k = nbrs.shape
    rows = np.repeat(np.arange(n), k)
    cols = nbrs.ravel()
    A = csr_from_coo(np.r_[rows, cols], np.r_[cols, rows], 1.0, (n, n))
    A.data[:] = 1.0
    return A


def knn_graph(X, k: int = 5, metric: str = "euclidean") -> sp.csr_array:
    """Symmetric binary KNN adjacency: i ~ j iff either is among the other's k nearest."""
    return _symmetrize_neighbors(knn_neighbors(X, k, metric))


def hypergraph_from_adjacency(A) -> Hypergraph:
    """One hyperedge per vertex j holding j and every neighbour of j (H = A + I)."""
    A = check_adjacency(A)
    n = A.shape[0]
    H = as_csr(A + sp.eye_array(n, format="csr"))
    H.data[:] = 1.0
    return Hypergraph(H)


def knn_hypergraph(X, k: int = 5, metric: str = "euclidean") -> Hypergraph:
    """KNN hypergraph with n hyperedges and unit weights.

    Vertex i belongs to hyperedge j iff i is among the k nearest neighbours of
    j or j among those of i.  Hyperedge j also contains j itself, so every
    vertex has positive degree.
    """
    return hypergraph_from_adjacency(knn_graph(X, k, metric))


def check_adjacency(A, *, tol: float = 0.0) -> sp.csr_array:
    """Validate a square, symmetric, binary, zero-diagonal adjacency matrix."""
    A = as_csr(A)
    n, m = A.shape
    if n != m:
        raise ValueError(f"adjacency must be square, got {A.shape}")
    if not np.all(A.data == 1.0):
        raise ValueError("adjacency must be binary")
    if np.any(A.diagonal() != 0):
        raise ValueError("adjacency must have a zero diagonal")
    if A.nnz and abs(A - A.T).max() > tol:
        raise ValueError("adjacency must be symmetric")
    return A


def graph_operator(A) -> sp.csr_array:
    """Renormalized graph propagation operator ``D^-1/2 (A + I) D^-1/2``."""
    A = check_adjacency(A)
    n = A.shape[0]
    A_hat = A + sp.eye_array(n, format="csr")
    inv_sqrt = 1.0 / np.sqrt(np.asarray(A_hat.sum(axis=1)).ravel())
    D = sp.diags_array(inv_sqrt)
    return as_csr(D @ A_hat @ D)


def hypergraph_operator(hg: Hypergraph) -> sp.csr_array:
    """Hypergraph propagation operator ``Dv^-1/2 H W De^-1 H^T Dv^-1/2``.

    Vertex degree is the weighted count of incident hyperedges; hyperedge
    degree is its (unweighted) vertex count.  The result is symmetric positive
    semi-definite with spectrum in [0, 1].
    """
    H = hg.incidence
    w = hg.edge_weights
    dv = np.asarray(H @ w).ravel()
    if np.any(dv <= 0):
        bad = int(np.flatnonzero(dv <= 0)[0])
        raise ValueError(f"vertex {bad} belongs to no hyperedge (zero degree)")
    de = np.asarray(H.sum(axis=0)).ravel()
    dv_inv_sqrt = sp.diags_array(1.0 / np.sqrt(dv))
    left = dv_inv_sqrt @ H @ sp.diags_array(w / de)
    theta = left @ (H.T @ dv_inv_sqrt)
    # the two triangles accumulate in different orders; average them
    return as_csr((theta + theta.T) * 0.5)
