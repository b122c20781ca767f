"""Drift measurement: exact gradient-level period drift, client-sampling
variance identities, the label-skew deviation law and normality diagnostics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset, PartitionPlan, heterogeneity_H

__all__ = [
    "DriftSample",
    "NormalityReport",
    "exact_period_drift",
    "subset_variance_bruteforce",
    "subset_variance_closed_form",
    "sampled_label_deviation",
    "expected_label_deviation",
    "normality_diagnostic",
    "track_drift_series",
]

MAX_ENUMERATION = 12


@dataclass(frozen=True)
class DriftSample:
    round: int
    value: float


@dataclass(frozen=True)
class NormalityReport:
    n: int
    skewness: float
    excess_kurtosis: float
    jb_stat: float


def exact_period_drift(spec, w, plan: PartitionPlan, dataset: LabeledDataset, sampled_clients) -> float:
    """Squared distance between the sampled clients' mean full-batch gradient
    and the sample-weighted population gradient, evaluated at ``w``.

    ``spec`` is anything with ``loss_and_gradient(w, features, labels)``.
    """
    grads = [spec.loss_and_gradient(w, s.features, s.labels)[1]
             for s in (plan.shard(dataset, k) for k in range(plan.n_clients))]
    # difference against a reference gradient first: cancels the shared part
    # exactly, so identical objectives give exactly zero drift
    ref = grads[0]
    diffs = [g - ref for g in grads]
    sizes = plan.sizes
    n = sizes.sum()
    full = np.zeros_like(ref)
    for k in range(plan.n_clients):
        full += (sizes[k] / n) * diffs[k]
    sampled = list(sampled_clients)
    sel = np.zeros_like(full)
    for k in sampled:
        sel += diffs[k]
    sel /= len(sampled)
    return float(np.sum((sel - full) ** 2))


def subset_variance_bruteforce(values, S: int) -> float:
    """Average of ``(subset mean - population mean)^2`` over every size-``S`` subset."""
    values = np.asarray(values, dtype=np.float64)
    N = values.shape[0]
    if N > MAX_ENUMERATION:
        raise ValueError(f"enumeration limited to N <= {MAX_ENUMERATION}, got {N}")
    if not 1 <= S <= N:
        raise ValueError("need 1 <= S <= N")
    mu = values.mean()
    total = 0.0
    count = 0
    for combo in itertools.combinations(range(N), S):
        total += (values[list(combo)].mean() - mu) ** 2
        count += 1
    return total / count


def subset_variance_closed_form(values, S: int) -> float:
    """``(s^2 / S) (1 - S/N)`` with ``s^2`` the unbiased sample variance."""
    values = np.asarray(values, dtype=np.float64)
    N = values.shape[0]
    if N < 2:
        raise ValueError("need at least two values")
    if not 1 <= S <= N:
        raise ValueError("need 1 <= S <= N")
    s2 = values.var(ddof=1)
    return s2 / S * (1.0 - S / N)


def sampled_label_deviation(plan: PartitionPlan, S: int, n_draws: int, seed: int, replace: bool = False) -> np.ndarray:
    """Monte-Carlo draws of ``D_S = mean_j (mean_{i in S} p_ij - p_j)^2``.

    ``p_j`` is the client-averaged class proportion. Clients are drawn
    uniformly, without replacement unless ``replace`` is set.
    """
    p = plan.class_proportions
    N = p.shape[0]
    if not 1 <= S <= N:
        raise ValueError("need 1 <= S <= N")
    center = p.mean(axis=0)
    rng = np.random.default_rng(seed)
    out = np.empty(n_draws)
    for t in range(n_draws):
        idx = rng.choice(N, size=S, replace=replace)
        out[t] = np.mean((p[idx].mean(axis=0) - center) ** 2)
    return out


def expected_label_deviation(plan: PartitionPlan, S: int, replace: bool = False) -> float:
    """Exact ``E[D_S]``: ``H/S`` for independent draws, times the finite
    population correction ``(N-S)/(N-1)`` without replacement."""
    H = heterogeneity_H(plan)
    if replace:
        return H / S
    N = plan.n_clients
    return H / S * (N - S) / (N - 1)


def normality_diagnostic(samples) -> NormalityReport:
    x = np.asarray(samples, dtype=np.float64)
    n = x.shape[0]
    if n < 8:
        raise ValueError("need at least 8 samples")
    c = x - x.mean()
    m2 = np.mean(c**2)
    if m2 == 0:
        raise ValueError("samples have zero variance")
    g1 = np.mean(c**3) / m2**1.5
    g2 = np.mean(c**4) / m2**2 - 3.0
    jb = n * (g1**2 / 6.0 + g2**2 / 24.0)
    return NormalityReport(n, float(g1), float(g2), float(jb))


def track_drift_series(logs) -> tuple[list[DriftSample], list[DriftSample]]:
    """Per-round (period, client) drift series from run telemetry.

    The period series is the exact period drift; the client series is the
    client-drift variance estimate, which only FedEve runs record (empty
    otherwise).
    """
    logs = list(logs)
    if any(r.period_drift is None for r in logs):
        raise ValueError("period drift was not recorded for every round")
    period = [DriftSample(r.t, float(r.period_drift)) for r in logs]
    client = []
    if logs and all(r.sigma_r2 is not None for r in logs):
        client = [DriftSample(r.t, float(r.sigma_r2)) for r in logs]
    return period, client
