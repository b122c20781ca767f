"""Server-side aggregation and optimizer steps.

FedAvg, FedAvgM and FedOpt-Adam act on the aggregated incremental update.
FedEve treats the server momentum as a prediction of the next update and the
aggregated client update as a noisy observation of it, and fuses the two with
a scalar Kalman gain driven by the estimated period-drift and client-drift
variances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .client import ClientUpdate, DivergenceError

__all__ = [
    "ServerHyper",
    "FedEveState",
    "MomentumState",
    "AdamState",
    "DriftEstimates",
    "aggregate",
    "fedavg_step",
    "fedavgm_step",
    "fedopt_adam_step",
    "fedeve_predict",
    "kalman_gain",
    "posterior_variance",
    "fedeve_observe_update",
    "estimate_drift_variances",
    "fuse_gaussians",
    "scaffold_global_variate",
    "SERVER_METHODS",
]

SERVER_METHODS = ("fedavg", "fedavgm", "fedopt", "fedeve")


@dataclass(frozen=True)
class ServerHyper:
    method: str = "fedavg"
    eta_g: float = 1.0
    beta: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.99
    tau: float = 1e-3

    def __post_init__(self):
        if self.method not in SERVER_METHODS:
            raise ValueError(f"unknown server method {self.method!r}")
        if self.eta_g <= 0:
            raise ValueError("eta_g must be > 0")
        if not 0 <= self.beta < 1:
            raise ValueError("beta must lie in [0, 1)")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")


@dataclass(frozen=True)
class FedEveState:
    w: np.ndarray
    M: np.ndarray
    sigma2: float = 0.0
    eta_g: float = 1.0

    @classmethod
    def initial(cls, w0: np.ndarray, eta_g: float = 1.0) -> "FedEveState":
        w0 = np.asarray(w0, dtype=np.float64)
        return cls(w0.copy(), np.zeros_like(w0), 0.0, eta_g)


@dataclass(frozen=True)
class MomentumState:
    w: np.ndarray
    M: np.ndarray


@dataclass(frozen=True)
class AdamState:
    w: np.ndarray
    m: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class DriftEstimates:
    sigma_Q2: float
    sigma_R2: float


def aggregate(updates: list[ClientUpdate]) -> np.ndarray:
    """Sample-weighted mean of client deltas, weights renormalised over the
    participating clients and summed in ascending ``client_id`` order."""
    if not updates:
        raise ValueError("need at least one client update")
    ordered = sorted(updates, key=lambda u: u.client_id)
    d = ordered[0].delta.shape
    if any(u.delta.shape != d for u in ordered):
        raise ValueError("client deltas have mismatched dimensions")
    total = sum(u.n_k for u in ordered)
    out = np.zeros(d)
    for u in ordered:
        out += (u.n_k / total) * u.delta
    return out


def fedavg_step(w: np.ndarray, delta: np.ndarray, eta_g: float = 1.0) -> np.ndarray:
    return w - eta_g * delta


def fedavgm_step(state: MomentumState, delta: np.ndarray, beta: float, eta_g: float) -> MomentumState:
    M = beta * state.M + delta
    return MomentumState(state.w - eta_g * M, M)


def fedopt_adam_step(state: AdamState, delta, beta1: float, beta2: float, tau: float, eta_g: float) -> AdamState:
    m = beta1 * state.m + (1 - beta1) * delta
    v = beta2 * state.v + (1 - beta2) * delta * delta
    return AdamState(state.w - eta_g * m / (np.sqrt(v) + tau), m, v)


def fedeve_predict(state: FedEveState, sigma_Q2: float = 0.0) -> tuple[np.ndarray, float]:
    """Look-ahead point broadcast to clients and its predicted variance."""
    if sigma_Q2 < 0:
        raise ValueError("sigma_Q2 must be >= 0")
    return state.w - state.eta_g * state.M, state.sigma2 + sigma_Q2


def kalman_gain(sigma_hat2: float, sigma_R2: float) -> float:
    """Weight given to the observation; 0/0 resolves to 1 (trust the observation)."""
    if sigma_hat2 < 0 or sigma_R2 < 0:
        raise ValueError("variances must be non-negative")
    total = sigma_hat2 + sigma_R2
    if total == 0:
        return 1.0
    return sigma_hat2 / total


def posterior_variance(s1_2: float, s2_2: float) -> float:
    """Variance of the product of two Gaussians, ``s1 s2 / (s1 + s2)``."""
    total = s1_2 + s2_2
    if total == 0:
        return 0.0
    return s1_2 * s2_2 / total


def estimate_drift_variances(M: np.ndarray, updates: list[ClientUpdate], delta_mean: np.ndarray) -> DriftEstimates:
    """Scalar period-drift and client-drift variance estimates.

    ``sigma_Q2`` compares the momentum with the aggregated update;
    ``sigma_R2`` spreads the raw (unweighted) client deltas around it.
    """
    if not updates:
        raise ValueError("need at least one client update")
    S = len(updates)
    d = delta_mean.shape[0]
    q = float(np.sum((M - delta_mean) ** 2)) / (S * d)
    r = 0.0
    for u in sorted(updates, key=lambda u: u.client_id):
        r += float(np.sum((u.delta - delta_mean) ** 2))
    return DriftEstimates(q, r / (S * S * d))


def fedeve_observe_update(
    state: FedEveState,
    delta_mean: np.ndarray,
    drift: DriftEstimates,
    force_gain: float | None = None,
) -> tuple[FedEveState, float]:
    """Fuse prediction and observation; returns ``(new_state, gain)``.

    ``force_gain`` pins the gain (diagnostic only; with 1.0 the update
    collapses to a plain FedAvg step).
    """
    delta_mean = np.asarray(delta_mean, dtype=np.float64)
    if delta_mean.shape != state.M.shape:
        raise ValueError("aggregated update does not match the model dimension")
    sigma_hat2 = state.sigma2 + drift.sigma_Q2
    G = kalman_gain(sigma_hat2, drift.sigma_R2) if force_gain is None else float(force_gain)
    # (1-G) M + G d == M + G (d - M); this form is exact at G = 0 and G = 1
    M = (1.0 - G) * state.M + G * delta_mean
    w = state.w - state.eta_g * M
    if force_gain is None:
        sigma2 = posterior_variance(sigma_hat2, drift.sigma_R2)
    else:
        sigma2 = (1.0 - G) * sigma_hat2
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(M)) and math.isfinite(sigma2)):
        raise DivergenceError("non-finite server state after the Kalman update")
    return replace(state, w=w, M=M, sigma2=sigma2), G


def fuse_gaussians(mu1: float, s1_2: float, mu2: float, s2_2: float) -> tuple[float, float]:
    """Closed-form product of N(mu1, s1_2) and N(mu2, s2_2), renormalised."""
    if s1_2 < 0 or s2_2 < 0:
        raise ValueError("variances must be non-negative")
    total = s1_2 + s2_2
    if total == 0:
        raise ValueError("at least one variance must be positive")
    return (mu1 * s2_2 + mu2 * s1_2) / total, posterior_variance(s1_2, s2_2)


def scaffold_global_variate(c_global, c_old: list, c_new: list, n_clients: int) -> np.ndarray:
    """``c <- c + (|S|/N) * mean_k (c_k' - c_k)`` over the sampled clients."""
    S = len(c_old)
    acc = np.zeros_like(c_global)
    for old, new in zip(c_old, c_new):
        acc += new - old
    return c_global + (S / n_clients) * (acc / S)
