"""Dense and sparse matrix kernels shared by every other module.

Dense matrices are C-ordered ``float64`` numpy arrays.  Sparse matrices are
``scipy.sparse.csr_array`` instances kept in canonical form (sorted column
indices, no duplicates, ``float64`` values), so products accumulate each output
row in ascending column order.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

__all__ = [
    "ShapeError",
    "as_dense",
    "as_csr",
    "csr_from_coo",
    "spmm",
    "gemm",
    "relu",
    "sigmoid",
    "map_elementwise",
]

# sigmoid saturates to exactly 0.0 / 1.0 in float64 beyond |x| ~ 37 and ~ 745;
# keep results inside the open unit interval.
_SIGMOID_LO = np.finfo(np.float64).tiny
_SIGMOID_HI = np.nextafter(1.0, 0.0)


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


def as_dense(M) -> np.ndarray:
    """Return ``M`` as a 2-D, C-contiguous float64 array, validating finiteness."""
    out = np.ascontiguousarray(M, dtype=np.float64)
    if out.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {out.shape}")
    if not np.isfinite(out).all():
        raise ValueError("matrix contains non-finite entries")
    return out


def as_csr(S) -> sp.csr_array:
    """Return a canonical float64 CSR copy of ``S`` (dense or any sparse format)."""
    if sp.issparse(S):
        out = sp.csr_array(S, dtype=np.float64, copy=True)
    else:
        out = sp.csr_array(as_dense(S))
    out.sum_duplicates()
    out.sort_indices()
    out.eliminate_zeros()
    if not np.isfinite(out.data).all():
        raise ValueError("sparse matrix contains non-finite entries")
    return out


def csr_from_coo(rows, cols, values, shape) -> sp.csr_array:
    """Build a canonical CSR matrix from coordinate triplets (duplicates summed)."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.broadcast_to(np.asarray(values, dtype=np.float64), rows.shape)
    return as_csr(sp.coo_array((values, (rows, cols)), shape=shape))


def _check_finite(out: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(out).all():
        raise FloatingPointError(f"{op} produced non-finite entries")
    return out


def spmm(S, M) -> np.ndarray:
    """Sparse-times-dense product ``S @ M``.

    Raises
    ------
    ShapeError
        If ``S.shape[1] != M.shape[0]``; the message names both shapes.
    """
    if not sp.issparse(S):
        raise TypeError("spmm expects a sparse left operand")
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or S.shape[1] != M.shape[0]:
        raise ShapeError(f"spmm: cannot multiply {S.shape} by {M.shape}")
    out = np.asarray(S @ M, dtype=np.float64)
    return _check_finite(np.ascontiguousarray(out), "spmm")


def gemm(A, B, transpose_b: bool = False) -> np.ndarray:
    """Dense product ``A @ B`` or, with ``transpose_b``, ``A @ B.T``."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2:
        raise ShapeError(f"gemm: expected matrices, got {A.shape} and {B.shape}")
    inner = B.shape[1] if transpose_b else B.shape[0]
    if A.shape[1] != inner:
        tag = "B^T" if transpose_b else "B"
        raise ShapeError(f"gemm: cannot multiply A{A.shape} by {tag} with B{B.shape}")
    out = A @ (B.T if transpose_b else B)
    return _check_finite(np.ascontiguousarray(out), "gemm")


def relu(M) -> np.ndarray:
    return np.maximum(np.asarray(M, dtype=np.float64), 0.0)


def sigmoid(M) -> np.ndarray:
    return np.clip(expit(np.asarray(M, dtype=np.float64)), _SIGMOID_LO, _SIGMOID_HI)


_ELEMENTWISE = {"relu": relu, "sigmoid": sigmoid}


def map_elementwise(M, fn: str) -> np.ndarray:
    """Apply ``"relu"`` or ``"sigmoid"`` entrywise; the shape is preserved."""
    try:
        return _ELEMENTWISE[fn](M)
    except KeyError:
        raise ValueError(f"unknown elementwise function {fn!r}") from None
