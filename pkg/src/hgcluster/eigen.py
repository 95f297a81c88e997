"""Symmetric eigensolvers: cyclic Jacobi for small blocks, block Lanczos for large ones.

``sym_eigen_smallest`` first splits the matrix into the connected components of
its sparsity pattern.  The spectrum of a block-diagonal matrix is the union of
the block spectra, and solving per block lets repeated eigenvalues that come
from disconnected pieces (e.g. one zero Laplacian eigenvalue per component) be
resolved exactly instead of depending on a single Krylov start vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh
from scipy.sparse.csgraph import connected_components

from .tensor import as_csr

__all__ = [
    "EigenPairs",
    "EigenConvergenceError",
    "jacobi_eigh",
    "lanczos_smallest",
    "sym_eigen_smallest",
    "JACOBI_MAX_N",
]

JACOBI_MAX_N = 256
RESIDUAL_TOL = 1e-8


class EigenConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (achieved residual {residual:.3e})")
        self.residual = residual


@dataclass
class EigenPairs:
    values: np.ndarray  # ascending, shape (k,)
    vectors: np.ndarray  # (n, k), orthonormal columns


def _round_robin(n: int):
    """Pairings of a round-robin tournament: n-1 rounds of n/2 disjoint pairs (n even)."""
    players = list(range(n))
    for _ in range(n - 1):
        half = n // 2
        yield np.array(players[:half]), np.array(players[half:][::-1])
        players = [players[0], players[-1]] + players[1:-1]


def _rotate_rows(M, p, q, c, s):
    """M <- J^T M for the disjoint plane rotations (p_i, q_i, c_i, s_i)."""
    Mp, Mq = M[p], M[q]
    M[p] = c[:, None] * Mp - s[:, None] * Mq
    M[q] = s[:, None] * Mp + c[:, None] * Mq


def jacobi_eigh(A, tol: float = 1e-14, max_sweeps: int = 60):
    """All eigenpairs of a dense symmetric matrix by cyclic Jacobi rotations.

    Sweeps use a round-robin ordering, so each round applies n/2 disjoint
    rotations at once.  Iteration stops when the off-diagonal Frobenius norm
    falls below ``tol`` times the Frobenius norm of ``A``.

    Returns
    -------
    values : ndarray, ascending
    vectors : ndarray with the matching eigenvectors as columns
    """
    A = np.array(A, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"expected a square matrix, got {A.shape}")
    if n == 0:
        return np.empty(0), np.empty((0, 0))
    # pad to even size with a decoupled zero row/column
    m = n + (n % 2)
    if m != n:
        A = np.pad(A, ((0, 1), (0, 1)))
    scale = np.linalg.norm(A)
    if scale == 0:
        return np.zeros(n), np.eye(n)

    def off_norm(B):
        return np.sqrt(2.0 * np.sum(np.triu(B, 1) ** 2))

    Vt = np.eye(m)  # eigenvectors as rows
    for _ in range(max_sweeps):
        if off_norm(A) <= tol * scale:
            break
        for p, q in _round_robin(m):
            apq = A[p, q]
            active = apq != 0.0
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            tau = (A[q, q] - A[p, p]) / (2.0 * apq)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            c = 1.0 / np.hypot(1.0, t)
            s = t * c
            # J[p,p]=J[q,q]=c, J[p,q]=s, J[q,p]=-s.  For symmetric A,
            # J^T (J^T A)^T = J^T A J, so two row passes suffice.
            _rotate_rows(A, p, q, c, s)
            A = np.ascontiguousarray(A.T)
            _rotate_rows(A, p, q, c, s)
            A[p, q] = 0.0
            A[q, p] = 0.0
            _rotate_rows(Vt, p, q, c, s)
    else:
        if off_norm(A) > 1e-10 * scale:
            raise EigenConvergenceError("Jacobi did not converge", off_norm(A) / scale)

    # the padded coordinate has zero couplings, so it is never rotated
    values = np.diag(A)[:n].copy()
    V = Vt[:n, :n].T
    order = np.argsort(values, kind="stable")
    return values[order], np.ascontiguousarray(V[:, order])


def _residuals(S, values, vectors) -> np.ndarray:
    R = S @ vectors - vectors * values[None, :]
    return np.linalg.norm(R, axis=0) / np.maximum(1.0, np.abs(values))


def lanczos_smallest(
    S, k: int, seed: int = 0, tol: float = RESIDUAL_TOL, max_dim: int | None = None, block: int | None = None
):
    """k algebraically smallest eigenpairs of a sparse symmetric matrix.

    Block Lanczos with full reorthogonalization against every previous basis
    vector.  A block wider than ``k`` lets eigenvalues of multiplicity up to
    the block width be resolved, which a single start vector cannot do.  When
    a new block loses rank (an invariant subspace was found), the missing
    directions are restarted from fresh seeded random vectors orthogonal to
    the current basis.  Ritz pairs come from the projected matrix and are
    accepted once their true residuals fall below ``tol``.
    """
    n = S.shape[0]
    max_dim = n if max_dim is None else min(max_dim, n)
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n={n}, got {k}")
    b = min(max_dim, block if block is not None else k + 2)
    rng = np.random.default_rng(seed)
    Q = np.zeros((n, max_dim))
    SQ = np.zeros((n, max_dim))

    def orthogonalize(W, m):
        for _ in range(2):
            W -= Q[:, :m] @ (Q[:, :m].T @ W)
        return W

    def fill(W, m):
        # orthonormal columns from W, topped up with random directions on rank loss
        out = []
        for col in W.T:
            v = col.copy()
            for _ in range(3):
                norm0 = np.linalg.norm(v)
                v = orthogonalize(v[:, None], m)[:, 0]
                for u in out:
                    v -= (u @ v) * u
                norm = np.linalg.norm(v)
                if norm > 1e-10 * max(norm0, 1e-300):
                    out.append(v / norm)
                    break
                v = rng.standard_normal(n)
        return np.column_stack(out) if out else np.zeros((n, 0))

    best = (np.inf, None, None)
    m = 0
    block_q = fill(rng.standard_normal((n, b)), 0)
    while True:
        w = min(block_q.shape[1], max_dim - m)
        Q[:, m : m + w] = block_q[:, :w]
        SQ[:, m : m + w] = S @ block_q[:, :w]
        m += w
        if m >= k:
            H = Q[:, :m].T @ SQ[:, :m]
            theta, Y = eigh((H + H.T) / 2)
            values = theta[:k]
            vectors = Q[:, :m] @ Y[:, :k]
            res = _residuals(S, values, vectors).max()
            if res < best[0]:
                best = (res, values, vectors)
            if res <= tol:
                break
        if m >= max_dim:
            break
        W = orthogonalize(SQ[:, m - w : m].copy(), m)
        block_q = fill(W, m)
    res, values, vectors = best
    if values is None or res > tol:
        raise EigenConvergenceError("Lanczos did not converge", float(res))
    return values, vectors


def sym_eigen_smallest(S, k: int, *, symmetry_tol: float = 1e-12, seed: int = 0) -> EigenPairs:
    """The ``k`` algebraically smallest eigenpairs of symmetric ``S``.

    Blocks (connected components of the sparsity pattern) of size at most
    ``JACOBI_MAX_N`` are solved densely with Jacobi; larger blocks use
    Lanczos.  Ties between blocks keep block order (ordered by lowest vertex).
    """
    S = as_csr(S)
    n = S.shape[0]
    if S.shape != (n, n):
        raise ValueError(f"expected a square matrix, got {S.shape}")
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n={n}, got {k}")
    if S.nnz and abs(S - S.T).max() > symmetry_tol:
        raise ValueError("matrix is not symmetric")

    _, comp = connected_components(S, directed=False)
    # components are numbered by their lowest vertex
    blocks = [np.flatnonzero(comp == c) for c in range(comp.max() + 1)]
    values, owners, local = [], [], []
    for b, idx in enumerate(blocks):
        sub = S[idx][:, idx]
        kb = min(k, idx.size)
        if idx.size <= JACOBI_MAX_N:
            vals, vecs = jacobi_eigh(sub.toarray())
            vals, vecs = vals[:kb], vecs[:, :kb]
        else:
            vals, vecs = lanczos_smallest(sub, kb, seed=seed)
        values.append(vals)
        owners.extend([b] * kb)
        local.extend(vecs.T)

    values = np.concatenate(values)
    order = np.argsort(values, kind="stable")[:k]
    vectors = np.zeros((n, k))
    for col, i in enumerate(order):
        vectors[blocks[owners[i]], col] = local[i]
    vals = values[order]
    res = _residuals(S, vals, vectors).max()
    if res > RESIDUAL_TOL:
        raise EigenConvergenceError("eigenpairs failed the residual check", float(res))
    return EigenPairs(values=vals, vectors=vectors)
