"""Desk-scale differentiable models: multinomial logistic regression and a
one-hidden-layer tanh MLP, both operating on flat float64 parameter vectors.

Parameter layout (row-major blocks, in order):

* logistic: ``W (n_classes, input_dim)``, ``b (n_classes,)``
* mlp:      ``W1 (hidden_dim, input_dim)``, ``b1 (hidden_dim,)``,
            ``W2 (n_classes, hidden_dim)``, ``b2 (n_classes,)``
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "ModelSpec",
    "Batch",
    "ShapeError",
    "init_params",
    "forward_loss",
    "backward",
    "loss_and_grad",
    "finite_diff_grad",
    "central_difference",
    "evaluate",
    "predict",
]


class ShapeError(ValueError):
    """Parameter vector or batch does not match the model's shapes."""


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "logistic"
    input_dim: int = 20
    n_classes: int = 10
    hidden_dim: int = 0
    init_scale: float = 0.0

    def __post_init__(self):
        if self.kind not in ("logistic", "mlp"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.kind == "mlp" and self.hidden_dim < 1:
            raise ValueError("mlp requires hidden_dim >= 1")
        if self.init_scale < 0:
            raise ValueError("init_scale must be >= 0")

    @property
    def dim(self) -> int:
        d, c = self.input_dim, self.n_classes
        if self.kind == "logistic":
            return d * c + c
        h = self.hidden_dim
        return h * d + h + c * h + c

    # duck-typed model interface used by the client runtime
    def loss(self, params: np.ndarray, features: np.ndarray, labels: np.ndarray) -> float:
        return forward_loss(self, params, Batch(features, labels))

    def gradient(self, params: np.ndarray, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
        return backward(self, params, Batch(features, labels))

    def loss_and_gradient(self, params, features, labels) -> tuple[float, np.ndarray]:
        return loss_and_grad(self, params, Batch(features, labels))


@dataclass(frozen=True)
class Batch:
    """A minibatch. ``index`` (optional) gives each row's original dataset
    position; when present, rows are reduced in ascending index order so the
    result does not depend on how the rows were permuted."""

    features: np.ndarray
    labels: np.ndarray
    index: np.ndarray | None = None

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ShapeError("features must be a 2-d matrix")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ShapeError(
                f"features has {self.features.shape[0]} rows but labels has {self.labels.shape[0]}"
            )
        if self.features.shape[0] < 1:
            raise ShapeError("batch must hold at least one example")
        if self.index is not None and self.index.shape[0] != self.labels.shape[0]:
            raise ShapeError("index length must match the number of rows")

    def canonical(self) -> "Batch":
        if self.index is None:
            return self
        order = np.argsort(self.index, kind="stable")
        return Batch(self.features[order], self.labels[order], self.index[order])


def init_params(spec: ModelSpec, seed: int) -> np.ndarray:
    """Weights uniform in ``[-init_scale, init_scale]``, biases zero."""
    rng = np.random.default_rng(seed)
    s = spec.init_scale
    d, c = spec.input_dim, spec.n_classes

    def weights(shape):
        if s == 0:
            return np.zeros(shape)
        return rng.uniform(-s, s, size=shape)

    if spec.kind == "logistic":
        blocks = [weights((c, d)), np.zeros(c)]
    else:
        h = spec.hidden_dim
        blocks = [weights((h, d)), np.zeros(h), weights((c, h)), np.zeros(c)]
    return np.concatenate([b.ravel() for b in blocks]).astype(np.float64)


def _unpack(spec: ModelSpec, params: np.ndarray):
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 1 or params.shape[0] != spec.dim:
        raise ShapeError(f"expected parameter vector of length {spec.dim}, got shape {params.shape}")
    d, c = spec.input_dim, spec.n_classes
    if spec.kind == "logistic":
        W = params[: c * d].reshape(c, d)
        b = params[c * d :]
        return W, b
    h = spec.hidden_dim
    o = 0
    W1 = params[o : o + h * d].reshape(h, d)
    o += h * d
    b1 = params[o : o + h]
    o += h
    W2 = params[o : o + c * h].reshape(c, h)
    o += c * h
    b2 = params[o : o + c]
    return W1, b1, W2, b2


def _check_batch(spec: ModelSpec, batch: Batch) -> Batch:
    if batch.features.shape[1] != spec.input_dim:
        raise ShapeError(
            f"batch has {batch.features.shape[1]} feature columns, model expects {spec.input_dim}"
        )
    return batch.canonical()


def _logits(spec, blocks, X):
    if spec.kind == "logistic":
        W, b = blocks
        return X @ W.T + b, None
    W1, b1, W2, b2 = blocks
    a = np.tanh(X @ W1.T + b1)
    return a @ W2.T + b2, a


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def forward_loss(spec: ModelSpec, params: np.ndarray, batch: Batch) -> float:
    """Mean softmax cross-entropy of ``batch`` under ``params``."""
    batch = _check_batch(spec, batch)
    z, _ = _logits(spec, _unpack(spec, params), batch.features)
    logp = _log_softmax(z)
    n = batch.labels.shape[0]
    return float(-logp[np.arange(n), batch.labels].mean())


def backward(spec: ModelSpec, params: np.ndarray, batch: Batch) -> np.ndarray:
    """Analytic gradient of :func:`forward_loss` with respect to ``params``."""
    return loss_and_grad(spec, params, batch)[1]


def loss_and_grad(spec: ModelSpec, params: np.ndarray, batch: Batch) -> tuple[float, np.ndarray]:
    """Loss and gradient from a single forward pass."""
    batch = _check_batch(spec, batch)
    blocks = _unpack(spec, params)
    X, y = batch.features, batch.labels
    n = y.shape[0]
    z, a = _logits(spec, blocks, X)
    logp = _log_softmax(z)
    loss = float(-logp[np.arange(n), y].mean())
    g = np.exp(logp)
    g[np.arange(n), y] -= 1.0
    g /= n
    if spec.kind == "logistic":
        return loss, np.concatenate([(g.T @ X).ravel(), g.sum(axis=0)])
    W1, b1, W2, b2 = blocks
    gW2 = g.T @ a
    gb2 = g.sum(axis=0)
    ga = (g @ W2) * (1.0 - a * a)
    gW1 = ga.T @ X
    gb1 = ga.sum(axis=0)
    return loss, np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2])


def central_difference(fn: Callable[[np.ndarray], float], w: np.ndarray, eps: float) -> np.ndarray:
    """Coordinate-wise central differences of a scalar function."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    w = np.array(w, dtype=np.float64)
    out = np.empty_like(w)
    for i in range(w.shape[0]):
        orig = w[i]
        w[i] = orig + eps
        hi = fn(w)
        w[i] = orig - eps
        lo = fn(w)
        w[i] = orig
        out[i] = (hi - lo) / (2.0 * eps)
    return out


def finite_diff_grad(spec: ModelSpec, params: np.ndarray, batch: Batch, eps: float = 1e-4) -> np.ndarray:
    return central_difference(lambda w: forward_loss(spec, w, batch), params, eps)


def predict(spec: ModelSpec, params: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Argmax class per row; ties resolve to the lowest class index."""
    z, _ = _logits(spec, _unpack(spec, params), np.asarray(features, dtype=np.float64))
    return np.argmax(z, axis=1)


def evaluate(spec: ModelSpec, params: np.ndarray, dataset) -> tuple[float, float]:
    """Return ``(accuracy, mean loss)`` over a dataset with ``features``/``labels``."""
    if dataset.labels.shape[0] == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    batch = Batch(dataset.features, dataset.labels)
    loss = forward_loss(spec, params, batch)
    acc = float(np.mean(predict(spec, params, dataset.features) == dataset.labels))
    return acc, loss
