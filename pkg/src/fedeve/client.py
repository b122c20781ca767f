"""Local client training: plain SGD, proximal SGD and SCAFFOLD-corrected SGD.

Every routine returns the incremental update ``delta = w_in - w_final`` so the
server can treat aggregation as a step ``w - sum_k p_k delta_k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LocalHyper",
    "ClientUpdate",
    "DivergenceError",
    "local_train_sgd",
    "local_train_prox",
    "local_train_scaffold",
    "num_local_steps",
]


class DivergenceError(RuntimeError):
    def __init__(self, message: str, round: int | None = None, client: int | None = None):
        where = []
        if round is not None:
            where.append(f"round {round}")
        if client is not None:
            where.append(f"client {client}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.round = round
        self.client = client


@dataclass(frozen=True)
class LocalHyper:
    eta_l: float = 0.01
    epochs: int = 1
    batch_size: int = 10
    mu: float = 0.0

    def __post_init__(self):
        if self.eta_l < 0:
            raise ValueError("eta_l must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.mu < 0:
            raise ValueError("mu must be >= 0")


@dataclass
class ClientUpdate:
    delta: np.ndarray
    n_k: int
    client_id: int
    train_loss: float = float("nan")
    steps: int = 0
    # largest ||gradient + correction|| seen over the local steps
    max_step_norm: float = 0.0


def num_local_steps(n_k: int, hyper: LocalHyper) -> int:
    return hyper.epochs * math.ceil(n_k / hyper.batch_size)


def _run(model, w_in, shard, hyper, seed, client_id, round, prox_mu=0.0, correction=None):
    if shard.n < 1:
        raise ValueError("client shard is empty")
    rng = np.random.default_rng(seed)
    w = np.array(w_in, dtype=np.float64)
    X, y = shard.features, shard.labels
    n, B = shard.n, hyper.batch_size
    losses = []
    max_norm = 0.0
    steps = 0
    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        for start in range(0, n, B):
            # canonical row order inside a minibatch keeps reductions order-free
            rows = np.sort(order[start : start + B])
            loss, g = model.loss_and_gradient(w, X[rows], y[rows])
            if not math.isfinite(loss):
                raise DivergenceError("non-finite local loss", round=round, client=client_id)
            if prox_mu:
                g = g + prox_mu * (w - w_in)
            if correction is not None:
                g = g + correction
            max_norm = max(max_norm, float(np.linalg.norm(g)))
            w = w - hyper.eta_l * g
            losses.append(loss)
            steps += 1
    if not np.all(np.isfinite(w)):
        raise DivergenceError("non-finite local parameters", round=round, client=client_id)
    return ClientUpdate(
        delta=w_in - w,
        n_k=n,
        client_id=client_id,
        train_loss=float(np.mean(losses)),
        steps=steps,
        max_step_norm=max_norm,
    )


def local_train_sgd(model, w_in, shard, hyper: LocalHyper, seed: int, client_id: int = 0, round: int | None = None) -> ClientUpdate:
    """``epochs`` passes of minibatch SGD over a freshly shuffled shard each
    epoch; the final partial minibatch is kept."""
    return _run(model, np.asarray(w_in, dtype=np.float64), shard, hyper, seed, client_id, round)


def local_train_prox(model, w_in, shard, hyper: LocalHyper, seed: int, client_id: int = 0, round: int | None = None) -> ClientUpdate:
    """SGD on the local loss plus ``mu/2 * ||w - w_in||^2``."""
    return _run(model, np.asarray(w_in, dtype=np.float64), shard, hyper, seed, client_id, round, prox_mu=hyper.mu)


def local_train_scaffold(model, w_in, shard, hyper: LocalHyper, c_k, c_global, seed: int, client_id: int = 0, round: int | None = None):
    """SGD with each step's gradient shifted by ``c_global - c_k``.

    Returns ``(update, new_c_k)`` with the new client variate from the
    "option II" rule ``c_k - c_global + delta / (K * eta_l)``.
    """
    c_k = np.asarray(c_k, dtype=np.float64)
    c_global = np.asarray(c_global, dtype=np.float64)
    w_in = np.asarray(w_in, dtype=np.float64)
    if c_k.shape != w_in.shape or c_global.shape != w_in.shape:
        raise ValueError("control variates must match the parameter dimension")
    correction = c_global - c_k
    upd = _run(model, w_in, shard, hyper, seed, client_id, round, correction=correction)
    if hyper.eta_l == 0:
        return upd, c_k.copy()
    new_c = c_k - c_global + upd.delta / (upd.steps * hyper.eta_l)
    return upd, new_c
