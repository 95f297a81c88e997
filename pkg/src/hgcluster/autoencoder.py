"""Two-layer (hyper)graph convolutional autoencoder.

The encoder is ``Z = P relu(P X theta1) theta2`` for a precomputed propagation
operator ``P`` (graph or hypergraph); the decoder is ``sigmoid(Z Z^T)``.
Training minimizes a binary cross-entropy between the decoder output and a
binary target structure ``T`` with full-batch gradient descent.

Loss
----
The objective is the standard (optionally positively weighted) binary
cross-entropy averaged over all n^2 vertex pairs::

    L = -(1/n^2) sum_ij [ w T_ij log s(z_i.z_j) + (1 - T_ij) log(1 - s(z_i.z_j)) ]

The negative-pair term is sometimes written ``(1 - T_ij)(1 - T_ij log s(.))``.
That expression is not a cross-entropy: it collapses to the constant
``1 - T_ij`` and carries no gradient.  The standard graph-autoencoder term
``(1 - T_ij) log(1 - s(.))`` is used instead.  ``pos_weight=1`` gives the
unweighted loss.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .tensor import ShapeError, as_csr, as_dense, gemm, relu, sigmoid, spmm

__all__ = [
    "EncoderParams",
    "TrainConfig",
    "TrainResult",
    "TrainingDivergedError",
    "init_params",
    "encode",
    "decode",
    "reconstruction_loss",
    "loss_gradients",
    "objective",
    "resolve_pos_weight",
    "train",
]

log = logging.getLogger(__name__)

OPTIMIZERS = ("plain_gd", "adaptive_moments")


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(
            f"loss became non-finite ({loss}) at epoch {epoch}; try a smaller learning rate"
        )
        self.epoch = epoch
        self.loss = loss


@dataclass
class EncoderParams:
    theta1: np.ndarray  # (L1, L2)
    theta2: np.ndarray  # (L2, D)

    def __post_init__(self):
        self.theta1 = as_dense(self.theta1)
        self.theta2 = as_dense(self.theta2)
        if self.theta1.shape[1] != self.theta2.shape[0]:
            raise ShapeError(
                f"theta1 {self.theta1.shape} and theta2 {self.theta2.shape} do not chain"
            )

    def copy(self) -> "EncoderParams":
        return EncoderParams(self.theta1.copy(), self.theta2.copy())


@dataclass(frozen=True)
class TrainConfig:
    hidden_dim: int = 32
    embed_dim: int = 16
    learning_rate: float = 0.01
    epochs: int = 200
    seed: int = 0
    optimizer: str = "adaptive_moments"
    pos_weight: float | str = "auto"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.hidden_dim < 1 or self.embed_dim < 1:
            raise ValueError("hidden_dim and embed_dim must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.pos_weight != "auto" and not float(self.pos_weight) > 0:
            raise ValueError(f"pos_weight must be 'auto' or > 0, got {self.pos_weight!r}")


@dataclass
class TrainResult:
    params: EncoderParams
    embedding: np.ndarray
    loss_history: list[float] = field(default_factory=list)


def init_params(n_features: int, cfg: TrainConfig) -> EncoderParams:
    """Glorot-uniform initialization from a PCG64 generator seeded with ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)

    def glorot(fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    return EncoderParams(
        glorot(n_features, cfg.hidden_dim), glorot(cfg.hidden_dim, cfg.embed_dim)
    )


def _check_shapes(P, X, params: EncoderParams) -> None:
    n = X.shape[0]
    if P.shape != (n, n):
        raise ShapeError(f"operator {P.shape} does not match {n} samples of X {X.shape}")
    if params.theta1.shape[0] != X.shape[1]:
        raise ShapeError(f"theta1 {params.theta1.shape} does not match X {X.shape}")


# matrices storing more than this fraction of their entries are applied densely
DENSE_OPERATOR_FILL = 0.2


class _Operand:
    """A fixed left factor (``P`` or ``X``) and its transpose, prepared once.

    The storage follows the fill: KNN hypergraph operators on sparse
    bag-of-words data can be nearly full (hub vertices share a hyperedge with
    almost everyone) and are faster as dense BLAS products, while binary
    feature matrices are mostly zeros and are faster in CSR.
    """

    def __init__(self, M):
        M = as_csr(M) if sp.issparse(M) else as_dense(M)
        nnz = M.nnz if sp.issparse(M) else np.count_nonzero(M)
        if nnz > DENSE_OPERATOR_FILL * M.shape[0] * M.shape[1]:
            dense = M.toarray() if sp.issparse(M) else M
            self.fwd, self.bwd = dense, np.ascontiguousarray(dense.T)
        else:
            M = as_csr(M)
            self.fwd, self.bwd = M, as_csr(M.T)
        self.shape = M.shape

    def apply(self, B, transpose: bool = False) -> np.ndarray:
        op = self.bwd if transpose else self.fwd
        return gemm(op, B) if isinstance(op, np.ndarray) else spmm(op, B)


def _forward(prop: _Operand, X: _Operand, params: EncoderParams):
    pre = prop.apply(X.apply(params.theta1))
    hidden = relu(pre)
    Z = prop.apply(gemm(hidden, params.theta2))
    return pre, hidden, Z


def encode(P, X, params: EncoderParams) -> np.ndarray:
    """Embedding ``Z = P relu(P X theta1) theta2`` of shape (n, D)."""
    X = np.asarray(X, dtype=np.float64)
    _check_shapes(P, X, params)
    return _forward(_Operand(P), _Operand(X), params)[2]


def _logits(Z: np.ndarray) -> np.ndarray:
    S = Z @ Z.T
    # exact symmetry regardless of how the BLAS split the product
    return (S + S.T) * 0.5


def decode(Z) -> np.ndarray:
    """Reconstructed structure ``sigmoid(Z Z^T)``; symmetric, entries in (0, 1)."""
    return sigmoid(_logits(as_dense(Z)))


def resolve_pos_weight(T, pos_weight) -> float:
    """``"auto"`` maps to (#zero entries)/(#one entries) of the target."""
    if pos_weight != "auto":
        return float(pos_weight)
    n_total = T.shape[0] * T.shape[1]
    n_pos = T.nnz
    if n_pos == 0:
        return 1.0
    return (n_total - n_pos) / n_pos


def _target(T, n: int) -> sp.csr_array:
    T = as_csr(T)
    if T.shape != (n, n):
        raise ShapeError(f"target {T.shape} does not match {n} embeddings")
    if not np.all(T.data == 1.0):
        raise ValueError("target structure must be binary")
    return T


def _softplus(S: np.ndarray) -> np.ndarray:
    # log(1 + e^s) without overflow
    return np.logaddexp(0.0, S)


def _loss_and_logit_grad(Z: np.ndarray, T: sp.csr_array, w: float, want_grad: bool):
    # every step below is one pass over an n x n array, done in place where possible
    n = Z.shape[0]
    S = Z @ Z.T
    rows, cols = T.nonzero()
    s_pos = S[rows, cols]
    E = np.abs(S)
    # sum(max(S, 0)) = (sum(S) + sum(|S|)) / 2
    relu_sum = 0.5 * (S.sum() + E.sum())
    np.negative(E, out=E)
    np.exp(E, out=E)  # E = exp(-|S|)
    # -log(1 - s(x)) = softplus(x) = max(x, 0) + log1p(exp(-|x|)) and -log s(x) = softplus(-x)
    total = relu_sum + np.log1p(E).sum()
    total += w * _softplus(-s_pos).sum() - _softplus(s_pos).sum()
    loss = total / (n * n)
    if not want_grad:
        return loss, None
    # dL/dS = [sigmoid(S) - T * (sigmoid(S) + w (1 - sigmoid(S)))] / n^2
    G = expit(S)
    sig_pos = G[rows, cols]
    G[rows, cols] -= sig_pos + w * (1.0 - sig_pos)
    G /= n * n
    return loss, G


def reconstruction_loss(Z, T, pos_weight: float = 1.0) -> float:
    """Weighted binary cross-entropy of ``sigmoid(Z Z^T)`` against binary ``T``.

    Uses log-sigmoid identities so that no logarithm of zero is ever formed.
    """
    Z = as_dense(Z)
    T = _target(T, Z.shape[0])
    return float(_loss_and_logit_grad(Z, T, resolve_pos_weight(T, pos_weight), False)[0])


def _loss_and_grads(prop: _Operand, X: _Operand, T, params: EncoderParams, w: float):
    pre, hidden, Z = _forward(prop, X, params)
    loss, G = _loss_and_logit_grad(Z, T, w, True)
    dZ = gemm(G, Z) + gemm(G.T, Z)
    dV = prop.apply(dZ, transpose=True)
    d_theta2 = gemm(hidden.T, dV)
    d_hidden = gemm(dV, params.theta2, transpose_b=True)
    d_pre = d_hidden * (pre > 0)  # relu subgradient 0 at 0
    d_theta1 = X.apply(prop.apply(d_pre, transpose=True), transpose=True)
    return loss, d_theta1, d_theta2


def loss_gradients(P, X, T, params: EncoderParams, pos_weight: float = 1.0):
    """Analytic ``(dL/dtheta1, dL/dtheta2)`` by backpropagation through the autoencoder."""
    X = np.asarray(X, dtype=np.float64)
    _check_shapes(P, X, params)
    T = _target(T, X.shape[0])
    prop, feats = _Operand(P), _Operand(X)
    _, g1, g2 = _loss_and_grads(prop, feats, T, params, resolve_pos_weight(T, pos_weight))
    return g1, g2


def objective(P, X, T, params: EncoderParams, pos_weight: float = 1.0) -> float:
    """Loss as a function of the parameters (used for finite-difference checks)."""
    return reconstruction_loss(encode(P, X, params), T, pos_weight)


class _Adam:
    def __init__(self, shapes, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class _GradientDescent:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


def train(P, X, T, cfg: TrainConfig = TrainConfig(), params: EncoderParams | None = None) -> TrainResult:
    """Full-batch training of the encoder weights.

    ``loss_history[e]`` is the loss of the parameters entering epoch ``e``.
    The returned embedding is ``encode(P, X, final_params)``.

    Raises
    ------
    TrainingDivergedError
        If the loss becomes non-finite; carries the epoch index.
    """
    X = as_dense(X)
    n = X.shape[0]
    if n < 2:
        raise ValueError("training needs at least 2 samples")
    T = _target(T, n)
    params = init_params(X.shape[1], cfg) if params is None else params.copy()
    _check_shapes(P, X, params)
    prop, feats = _Operand(P), _Operand(X)
    w = resolve_pos_weight(T, cfg.pos_weight)

    shapes = [params.theta1.shape, params.theta2.shape]
    if cfg.optimizer == "adaptive_moments":
        opt = _Adam(shapes, cfg.learning_rate)
    else:
        opt = _GradientDescent(cfg.learning_rate)

    history = []
    for epoch in range(cfg.epochs):
        try:
            # overflow is detected and reported below, not warned about
            with np.errstate(over="ignore", invalid="ignore"):
                loss, g1, g2 = _loss_and_grads(prop, feats, T, params, w)
        except FloatingPointError:
            raise TrainingDivergedError(epoch, float("nan")) from None
        if not np.isfinite(loss):
            raise TrainingDivergedError(epoch, loss)
        history.append(float(loss))
        opt.step([params.theta1, params.theta2], [g1, g2])
        if epoch % 50 == 0:
            log.debug("epoch %d loss %.6f", epoch, loss)

    return TrainResult(params=params, embedding=_forward(prop, feats, params)[2], loss_history=history)
