"""Two-layer hypergraph convolution network on dense numpy arrays.

The propagation operator is the degree-normalized incidence product

    A = Dv^{-1/2} H De^{-1} H^T Dv^{-1/2}

with identity hyperedge weights. Zero node or edge degrees invert to zero,
so isolated nodes simply stop propagating instead of producing NaNs. ``A``
is formed as ``T @ T.T`` for ``T = Dv^{-1/2} H De^{-1/2}``, which makes it
bitwise symmetric.

The network itself is

    logits = A @ relu(A @ X @ theta1) @ theta2

trained with softmax cross-entropy and Adam. Training is the only place
parameters change; afterwards they are frozen (numpy writeable flag) so the
attack code cannot touch them by accident.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DivergenceError
from .hypergraph import Hypergraph


def normalized_adjacency(h: Hypergraph) -> np.ndarray:
    """Dense symmetric propagation matrix for ``h``.

    The product stays sparse until the very end; forming A as a Gram product
    T @ T.T means entries (i, j) and (j, i) sum identical terms in identical
    order, so the result is bitwise symmetric.
    """
    dv = h.node_degrees
    de = h.edge_degrees
    inv_sqrt_dv = np.where(dv > 0, 1.0 / np.sqrt(np.where(dv > 0, dv, 1.0)), 0.0)
    inv_sqrt_de = np.where(de > 0, 1.0 / np.sqrt(np.where(de > 0, de, 1.0)), 0.0)
    T = (sp.diags(inv_sqrt_dv) @ h.incidence @ sp.diags(inv_sqrt_de)).tocsr()
    T.sort_indices()
    return (T @ T.T).toarray()


@dataclass
class SurrogateParams:
    """Weights of the two layers: theta1 (F, d) and theta2 (d, C)."""

    theta1: np.ndarray
    theta2: np.ndarray

    @property
    def hidden_dim(self) -> int:
        return self.theta1.shape[1]

    @property
    def frozen(self) -> bool:
        return not (self.theta1.flags.writeable or self.theta2.flags.writeable)

    def copy(self) -> "SurrogateParams":
        return SurrogateParams(self.theta1.copy(), self.theta2.copy())

    def freeze(self) -> "SurrogateParams":
        self.theta1.flags.writeable = False
        self.theta2.flags.writeable = False
        return self


def init_params(
    num_features: int, hidden_dim: int, num_classes: int, rng: np.random.Generator
) -> SurrogateParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init, one bound per layer."""
    b1 = 1.0 / np.sqrt(num_features)
    b2 = 1.0 / np.sqrt(hidden_dim)
    theta1 = rng.uniform(-b1, b1, size=(num_features, hidden_dim))
    theta2 = rng.uniform(-b2, b2, size=(hidden_dim, num_classes))
    return SurrogateParams(theta1, theta2)


def hidden_embeddings(
    adjacency: np.ndarray, features: np.ndarray, params: SurrogateParams
) -> np.ndarray:
    """First-layer representations relu(A @ X @ theta1), shape (n, d)."""
    return np.maximum(adjacency @ (features @ params.theta1), 0.0)


def forward(
    adjacency: np.ndarray, features: np.ndarray, params: SurrogateParams
) -> np.ndarray:
    """Raw logits, shape (n, C)."""
    return adjacency @ (hidden_embeddings(adjacency, features, params) @ params.theta2)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def predict(logits: np.ndarray) -> np.ndarray:
    return np.argmax(logits, axis=1).astype(np.int64)


def misclassification_rate(
    logits: np.ndarray, labels: np.ndarray, idx: np.ndarray
) -> float:
    """Percentage of ``idx`` whose argmax logit disagrees with the label."""
    if len(idx) == 0:
        raise ValueError("cannot score an empty index set")
    wrong = predict(logits[idx]) != labels[idx]
    return 100.0 * float(np.mean(wrong))


def cross_entropy_loss(
    adjacency: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    idx: np.ndarray,
    params: SurrogateParams,
) -> float:
    """Mean cross-entropy of the forward pass over the nodes in ``idx``."""
    logp = log_softmax(forward(adjacency, features, params)[idx])
    return -float(np.mean(logp[np.arange(len(idx)), labels[idx]]))


def cross_entropy_feature_gradient(
    adjacency: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    idx: np.ndarray,
    params: SurrogateParams,
) -> np.ndarray:
    """d(mean cross-entropy over idx)/dX, shape (n, F)."""
    pre = adjacency @ (features @ params.theta1)
    hidden = np.maximum(pre, 0.0)
    logits = adjacency @ (hidden @ params.theta2)

    logp = log_softmax(logits[idx])
    d_logits = np.zeros_like(logits)
    d_logits_idx = np.exp(logp)
    d_logits_idx[np.arange(len(idx)), labels[idx]] -= 1.0
    d_logits[idx] = d_logits_idx / len(idx)

    d_pre = ((adjacency @ d_logits) @ params.theta2.T) * (pre > 0)
    return (adjacency @ d_pre) @ params.theta1.T


@dataclass
class TrainConfig:
    hidden_dim: int = 16
    learning_rate: float = 0.01
    epochs: int = 200
    weight_decay: float = 5e-4
    seed: int = 2024


@dataclass
class _AdamState:
    m: np.ndarray
    v: np.ndarray
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = field(default=0)

    def step(self, param: np.ndarray, grad: np.ndarray, lr: float) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        param -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train_surrogate(
    adjacency: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    train_idx: np.ndarray,
    config: TrainConfig | None = None,
) -> tuple[SurrogateParams, list[float]]:
    """Fit the surrogate on ``train_idx`` and return frozen params + loss history.

    The objective is mean cross-entropy over the training nodes plus an L2
    penalty ``weight_decay/2 * (||theta1||^2 + ||theta2||^2)``; the recorded
    history is this full objective per epoch. ``A @ X`` is constant during
    training and is computed once.
    """
    cfg = config or TrainConfig()
    rng = np.random.default_rng(cfg.seed)
    n_feat = features.shape[1]
    n_cls = int(labels.max()) + 1
    params = init_params(n_feat, cfg.hidden_dim, n_cls, rng)

    ax = adjacency @ features
    n_train = len(train_idx)
    onehot = np.zeros((n_train, n_cls))
    onehot[np.arange(n_train), labels[train_idx]] = 1.0

    adam1 = _AdamState(np.zeros_like(params.theta1), np.zeros_like(params.theta1))
    adam2 = _AdamState(np.zeros_like(params.theta2), np.zeros_like(params.theta2))
    history: list[float] = []

    for epoch in range(cfg.epochs):
        # Overflow surfaces as a non-finite loss and raises below; the numpy
        # warnings for the intermediate products are not actionable.
        with np.errstate(over="ignore", invalid="ignore"):
            pre = ax @ params.theta1
            hidden = np.maximum(pre, 0.0)
            logits = adjacency @ (hidden @ params.theta2)

            logp = log_softmax(logits[train_idx])
            ce = -float(np.mean(logp[np.arange(n_train), labels[train_idx]]))
            reg = 0.5 * cfg.weight_decay * (
                float(np.sum(params.theta1**2)) + float(np.sum(params.theta2**2))
            )
        if not np.isfinite(ce + reg):
            raise DivergenceError("surrogate loss became non-finite", iteration=epoch)
        history.append(ce + reg)

        d_logits_train = (np.exp(logp) - onehot) / n_train
        d_logits = np.zeros_like(logits)
        d_logits[train_idx] = d_logits_train

        # adjacency is symmetric, so A^T @ dZ == A @ dZ.
        a_dz = adjacency @ d_logits
        g_theta2 = hidden.T @ a_dz + cfg.weight_decay * params.theta2
        d_hidden = a_dz @ params.theta2.T
        d_pre = d_hidden * (pre > 0)
        g_theta1 = ax.T @ d_pre + cfg.weight_decay * params.theta1

        adam1.step(params.theta1, g_theta1, cfg.learning_rate)
        adam2.step(params.theta2, g_theta2, cfg.learning_rate)

    return params.freeze(), history
