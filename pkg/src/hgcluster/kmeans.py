"""Seeded Lloyd's k-means with k-means++ seeding and best-of-n restarts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import as_dense

__all__ = ["ClusterAssignment", "kmeans", "canonicalize_labels", "squared_distances"]


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations_run: int
    # inertia after every assignment step of the winning restart
    inertia_history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def squared_distances(M: np.ndarray, C: np.ndarray) -> np.ndarray:
    """(n, k) squared Euclidean distances between rows of ``M`` and ``C``."""
    d = (
        np.einsum("ij,ij->i", M, M)[:, None]
        - 2.0 * (M @ C.T)
        + np.einsum("ij,ij->i", C, C)[None, :]
    )
    return np.maximum(d, 0.0)


def canonicalize_labels(labels) -> np.ndarray:
    """Relabel so clusters are numbered in order of their lowest-index member."""
    labels = np.asarray(labels)
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first, kind="stable")
    mapping = np.empty(order.size, dtype=np.int64)
    mapping[order] = np.arange(order.size)
    return mapping[np.unique(labels, return_inverse=True)[1]]


def _sq_to_point(M, x):
    # direct differences: identical points get exactly zero mass
    diff = M - x
    return np.einsum("ij,ij->i", diff, diff)


def _kmeans_pp(M: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = M.shape[0]
    idx = [int(rng.integers(n))]
    closest = _sq_to_point(M, M[idx[0]])
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            raise ValueError(f"cannot seed {k} clusters: fewer than {k} distinct points")
        # inverse-CDF draw proportional to squared distance
        r = rng.random() * total
        j = int(np.searchsorted(np.cumsum(closest), r, side="right"))
        j = min(j, n - 1)
        while closest[j] <= 0:  # guard against landing on a zero-mass point
            j -= 1
        idx.append(j)
        closest = np.minimum(closest, _sq_to_point(M, M[j]))
    return M[idx].copy()


def _assign(M, C):
    d = squared_distances(M, C)
    labels = np.argmin(d, axis=1)
    # recompute the chosen costs directly; the Gram form leaves rounding residue
    diff = M - C[labels]
    return labels, np.einsum("ij,ij->i", diff, diff)


def _repair_empty(M, C, labels, cost):
    k = C.shape[0]
    counts = np.bincount(labels, minlength=k)
    for c in np.flatnonzero(counts == 0):
        # move the point farthest from its centroid into the empty cluster,
        # never emptying a singleton in the process
        movable = counts[labels] > 1
        j = int(np.argmax(np.where(movable, cost, -1.0)))
        counts[labels[j]] -= 1
        labels[j] = c
        counts[c] = 1
        C[c] = M[j]
        cost[j] = 0.0
    return labels, cost


def _lloyd(M, C, max_iter):
    k = C.shape[0]
    labels, cost = _assign(M, C)
    labels, cost = _repair_empty(M, C, labels, cost)
    history = [float(cost.sum())]
    it = 0
    for it in range(1, max_iter + 1):
        for c in range(k):
            C[c] = M[labels == c].mean(axis=0)
        new_labels, cost = _assign(M, C)
        new_labels, cost = _repair_empty(M, C, new_labels, cost)
        history.append(float(cost.sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels, C, history, it


def kmeans(M, k: int, seed: int = 0, max_iter: int = 300, n_init: int = 10) -> ClusterAssignment:
    """Partition the rows of ``M`` into ``k`` clusters.

    Each of the ``n_init`` restarts draws k-means++ seeds from one generator
    seeded with ``seed`` and runs Lloyd iterations until the labels stop
    changing or ``max_iter`` updates have run.  The restart with the lowest
    inertia wins (earlier restart on ties).  Labels are canonicalized so that
    cluster 0 holds point 0, and so on.
    """
    M = as_dense(M)
    n = M.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n={n}, got {k}")
    if n_init < 1 or max_iter < 1:
        raise ValueError("n_init and max_iter must be >= 1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        C = _kmeans_pp(M, k, rng)
        labels, C, history, iters = _lloyd(M, C, max_iter)
        if best is None or history[-1] < best[2][-1]:
            best = (labels, C, history, iters)

    labels, C, history, iters = best
    canon = canonicalize_labels(labels)
    # canon[i] is the new id of point i's cluster
    centroids = np.empty_like(C)
    centroids[canon] = C[labels]
    return ClusterAssignment(
        labels=canon,
        centroids=centroids,
        inertia=history[-1],
        iterations_run=iters,
        inertia_history=history,
    )
