"""Normalized spectral clustering (symmetric Laplacian, row-normalized embedding)."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .eigen import sym_eigen_smallest
from .graphs import check_adjacency
from .kmeans import ClusterAssignment, kmeans
from .tensor import as_csr

__all__ = ["normalized_laplacian", "spectral_embedding", "spectral_clustering"]


def normalized_laplacian(A) -> sp.csr_array:
    """``I - D^-1/2 A D^-1/2``; isolated vertices use degree 1."""
    A = check_adjacency(A)
    deg = np.asarray(A.sum(axis=1)).ravel()
    deg[deg == 0] = 1.0
    D = sp.diags_array(1.0 / np.sqrt(deg))
    return as_csr(sp.eye_array(A.shape[0], format="csr") - D @ A @ D)


def spectral_embedding(A, k: int, seed: int = 0) -> np.ndarray:
    """Rows of the k smallest Laplacian eigenvectors, scaled to unit length.

    Zero rows stay zero.
    """
    if k < 2:
        raise ValueError(f"spectral clustering needs k >= 2, got {k}")
    pairs = sym_eigen_smallest(normalized_laplacian(A), k, seed=seed)
    U = pairs.vectors
    norms = np.linalg.norm(U, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    return U / safe[:, None]


def spectral_clustering(A, k: int, seed: int = 0, n_init: int = 10) -> ClusterAssignment:
    return kmeans(spectral_embedding(A, k, seed), k, seed=seed, n_init=n_init)
