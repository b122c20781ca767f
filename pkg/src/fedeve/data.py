"""Datasets, client partitioners and per-round drift-isolation views."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "LabeledDataset",
    "PartitionPlan",
    "DRIFT_MODES",
    "IdxFormatError",
    "IdxMagicError",
    "IdxTruncatedError",
    "IdxCountMismatchError",
    "gen_synthetic",
    "train_test_split",
    "load_idx",
    "write_idx",
    "partition_dirichlet",
    "partition_iid",
    "load_plan",
    "drift_isolation_view",
    "heterogeneity_H",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

DRIFT_MODES = ("none", "period_only", "client_only", "both")


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    # original row positions; used for canonical ordering and conservation checks
    index: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features must be (n, d) with one label per row")
        if self.labels.shape[0] < 1:
            raise ValueError("dataset must contain at least one example")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise ValueError("labels must lie in [0, n_classes)")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        if self.index is None:
            object.__setattr__(self, "index", np.arange(self.labels.shape[0]))

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, rows) -> "LabeledDataset":
        rows = np.asarray(rows, dtype=np.int64)
        return LabeledDataset(self.features[rows], self.labels[rows], self.n_classes, self.index[rows])

    def label_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


@dataclass(frozen=True)
class PartitionPlan:
    """Disjoint, covering assignment of dataset rows to clients."""

    assignments: tuple
    n_clients: int
    alpha: float | str
    class_proportions: np.ndarray

    @classmethod
    def build(cls, assignments, labels: np.ndarray, n_classes: int, alpha, n_total: int | None = None):
        assignments = tuple(np.sort(np.asarray(a, dtype=np.int64)) for a in assignments)
        n_total = labels.shape[0] if n_total is None else n_total
        flat = np.concatenate(assignments) if assignments else np.empty(0, dtype=np.int64)
        if flat.shape[0] != n_total or not np.array_equal(np.sort(flat), np.arange(n_total)):
            raise ValueError("assignments must be disjoint and cover every index exactly once")
        if any(a.shape[0] == 0 for a in assignments):
            raise ValueError("every client must hold at least one example")
        props = np.stack(
            [np.bincount(labels[a], minlength=n_classes) / a.shape[0] for a in assignments]
        )
        return cls(assignments, len(assignments), alpha, props)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([a.shape[0] for a in self.assignments])

    def shard(self, dataset: LabeledDataset, client: int) -> LabeledDataset:
        return dataset.subset(self.assignments[client])


# -- synthesis and loading -------------------------------------------------


def gen_synthetic(n_classes: int, input_dim: int, per_class: int, separation: float, seed: int) -> LabeledDataset:
    """Gaussian blobs: class ``c`` ~ N(separation * mu_c, I) with unit-norm ``mu_c``.

    Rows are grouped by class (class 0 first).
    """
    if min(n_classes, input_dim, per_class) < 1:
        raise ValueError("counts must be >= 1")
    if separation < 0:
        raise ValueError("separation must be >= 0")
    rng = np.random.default_rng(seed)
    centers = _draw_centers(rng, n_classes, input_dim)
    X = np.repeat(separation * centers, per_class, axis=0)
    X += rng.standard_normal(X.shape)
    y = np.repeat(np.arange(n_classes), per_class)
    return LabeledDataset(X, y, n_classes)


def synthetic_centers(n_classes: int, input_dim: int, seed: int) -> np.ndarray:
    """Unit class directions used by :func:`gen_synthetic` for ``seed``."""
    return _draw_centers(np.random.default_rng(seed), n_classes, input_dim)


def _draw_centers(rng, n_classes, input_dim):
    centers = rng.standard_normal((n_classes, input_dim))
    return centers / np.linalg.norm(centers, axis=1, keepdims=True)


def train_test_split(dataset: LabeledDataset, test_fraction: float, seed: int):
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    perm = np.random.default_rng(seed).permutation(dataset.n)
    n_test = int(round(dataset.n * test_fraction))
    test, train = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    tr = LabeledDataset(dataset.features[train], dataset.labels[train], dataset.n_classes)
    te = LabeledDataset(dataset.features[test], dataset.labels[test], dataset.n_classes)
    return tr, te


class IdxFormatError(ValueError):
    pass


class IdxMagicError(IdxFormatError):
    pass


class IdxTruncatedError(IdxFormatError):
    pass


class IdxCountMismatchError(IdxFormatError):
    pass


def _read_header(buf: bytes, path, magic: int, ndims: int):
    need = 4 * (1 + ndims)
    if len(buf) < need:
        raise IdxTruncatedError(f"{path}: header needs {need} bytes, file has {len(buf)}")
    got = struct.unpack(">I", buf[:4])[0]
    if got != magic:
        raise IdxMagicError(f"{path}: bad magic 0x{got:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(f">{ndims}I", buf[4:need])
    return dims, buf[need:]


def load_idx(images_path, labels_path, n_classes: int | None = None) -> LabeledDataset:
    """Read an IDX image/label pair; pixel bytes are scaled to [0, 1]."""
    img_buf = Path(images_path).read_bytes()
    lab_buf = Path(labels_path).read_bytes()
    (count, rows, cols), pixels = _read_header(img_buf, images_path, IDX_IMAGES_MAGIC, 3)
    (n_labels,), raw_labels = _read_header(lab_buf, labels_path, IDX_LABELS_MAGIC, 1)
    if len(pixels) < count * rows * cols:
        raise IdxTruncatedError(
            f"{images_path}: expected {count * rows * cols} pixel bytes, found {len(pixels)}"
        )
    if len(raw_labels) < n_labels:
        raise IdxTruncatedError(f"{labels_path}: expected {n_labels} label bytes, found {len(raw_labels)}")
    if n_labels != count:
        raise IdxCountMismatchError(f"{labels_path} holds {n_labels} labels but {images_path} holds {count} images")
    X = np.frombuffer(pixels, dtype=np.uint8, count=count * rows * cols).reshape(count, rows * cols)
    y = np.frombuffer(raw_labels, dtype=np.uint8, count=n_labels).astype(np.int64)
    if n_classes is None:
        n_classes = max(int(y.max()) + 1, 2)
    return LabeledDataset(X.astype(np.float64) / 255.0, y, n_classes)


def write_idx(images_path, labels_path, images: np.ndarray, labels: np.ndarray) -> None:
    """Write uint8 ``images`` (count, rows, cols) and ``labels`` in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    count, rows, cols = images.shape
    Path(images_path).write_bytes(struct.pack(">IIII", IDX_IMAGES_MAGIC, count, rows, cols) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]) + labels.tobytes())


# -- partitioning ----------------------------------------------------------


def _dirichlet_split(labels: np.ndarray, n_classes: int, n_clients: int, alpha: float, rng) -> list:
    buckets = [[] for _ in range(n_clients)]
    for c in range(n_classes):
        idx = np.flatnonzero(labels == c)
        if idx.shape[0] == 0:
            continue
        idx = rng.permutation(idx)
        props = rng.dirichlet(np.full(n_clients, alpha))
        cuts = (np.cumsum(props)[:-1] * idx.shape[0]).astype(np.int64)
        for k, part in enumerate(np.split(idx, cuts)):
            buckets[k].extend(part.tolist())
    # repair: every client needs at least one example
    while True:
        sizes = [len(b) for b in buckets]
        empty = [k for k, s in enumerate(sizes) if s == 0]
        if not empty:
            break
        donor = int(np.argmax(sizes))
        buckets[empty[0]].append(buckets[donor].pop())
    return buckets


def partition_dirichlet(dataset: LabeledDataset, n_clients: int, alpha: float, seed: int) -> PartitionPlan:
    """Label-skew split: each class is divided across clients by Dirichlet(alpha) proportions."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if n_clients < 2:
        raise ValueError("n_clients must be >= 2")
    if dataset.n < n_clients:
        raise ValueError(f"cannot give {n_clients} clients an example each from {dataset.n} rows")
    rng = np.random.default_rng(seed)
    buckets = _dirichlet_split(dataset.labels, dataset.n_classes, n_clients, alpha, rng)
    return PartitionPlan.build(buckets, dataset.labels, dataset.n_classes, float(alpha))


def partition_iid(dataset: LabeledDataset, n_clients: int, seed: int) -> PartitionPlan:
    if n_clients < 1:
        raise ValueError("n_clients must be >= 1")
    if dataset.n < n_clients:
        raise ValueError(f"cannot give {n_clients} clients an example each from {dataset.n} rows")
    perm = np.random.default_rng(seed).permutation(dataset.n)
    return PartitionPlan.build(np.array_split(perm, n_clients), dataset.labels, dataset.n_classes, "iid")


def load_plan(path, dataset: LabeledDataset) -> PartitionPlan:
    """Load an externally supplied plan: JSON ``{"assignments": [[i, ...], ...]}``."""
    doc = json.loads(Path(path).read_text())
    return PartitionPlan.build(doc["assignments"], dataset.labels, dataset.n_classes, "external")


def drift_isolation_view(
    mode: str,
    base_plan: PartitionPlan,
    dataset: LabeledDataset,
    sampled_clients,
    round_seed: int,
    client_only_alpha: float = 0.01,
) -> list[LabeledDataset]:
    """Training shards handed to the sampled clients in one round.

    ``none`` and ``both`` return each client's own shard of ``base_plan``; the
    caller passes an iid plan for ``none`` and the non-iid plan for ``both``.
    ``period_only`` pools the sampled shards and deals them back evenly, class
    by class. ``client_only`` pools the sampled shards (iid base plan) and
    re-splits the pool with Dirichlet(``client_only_alpha``).
    """
    if mode not in DRIFT_MODES:
        raise ValueError(f"unknown drift isolation mode {mode!r}")
    sampled = list(sampled_clients)
    if not sampled:
        raise ValueError("sampled client set is empty")
    for k in sampled:
        if not 0 <= k < base_plan.n_clients:
            raise ValueError(f"client {k} is not part of the plan")
    if mode in ("none", "both"):
        return [base_plan.shard(dataset, k) for k in sampled]

    rng = np.random.default_rng(round_seed)
    pool = np.concatenate([base_plan.assignments[k] for k in sampled])
    m = len(sampled)
    if mode == "period_only":
        pool = rng.permutation(pool)
        pool = pool[np.argsort(dataset.labels[pool], kind="stable")]
        return [dataset.subset(np.sort(pool[i::m])) for i in range(m)]

    if pool.shape[0] < m:
        raise ValueError("pooled shard smaller than the number of sampled clients")
    buckets = _dirichlet_split(dataset.labels[pool], dataset.n_classes, m, client_only_alpha, rng)
    return [dataset.subset(np.sort(pool[np.asarray(b, dtype=np.int64)])) for b in buckets]


def heterogeneity_H(plan: PartitionPlan) -> float:
    """Mean over clients of the per-client label-proportion variance around the
    client-averaged proportions."""
    p = plan.class_proportions
    return float(np.mean((p - p.mean(axis=0)) ** 2))
