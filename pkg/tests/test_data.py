import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fedeve.data import (
    IdxCountMismatchError,
    IdxMagicError,
    IdxTruncatedError,
    LabeledDataset,
    PartitionPlan,
    drift_isolation_view,
    gen_synthetic,
    heterogeneity_H,
    load_idx,
    load_plan,
    partition_dirichlet,
    partition_iid,
    synthetic_centers,
    train_test_split,
    write_idx,
)
from fedeve.model import Batch, ModelSpec, backward, evaluate


def assert_partition(plan, n):
    flat = np.concatenate(plan.assignments)
    assert flat.shape[0] == n
    assert np.array_equal(np.sort(flat), np.arange(n))
    assert all(a.shape[0] >= 1 for a in plan.assignments)
    assert np.allclose(plan.class_proportions.sum(axis=1), 1.0, atol=1e-12)


def entropy(p):
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


# -- synthesis ---------------------------------------------------------------


def test_synthetic_counts_balanced():
    ds = gen_synthetic(10, 20, 500, 3.0, 1)
    assert ds.n == 5000
    assert np.array_equal(ds.label_counts(), np.full(10, 500))
    assert ds.features.shape == (5000, 20)


def test_synthetic_deterministic():
    a, b = gen_synthetic(3, 4, 10, 1.0, 9), gen_synthetic(3, 4, 10, 1.0, 9)
    assert np.array_equal(a.features, b.features)


def test_synthetic_class_mean_near_center():
    ds = gen_synthetic(3, 5, 10000, 2.5, 4)
    center = 2.5 * synthetic_centers(3, 5, 4)[0]
    mean = ds.features[ds.labels == 0].mean(axis=0)
    assert np.max(np.abs(mean - center)) < 0.05


def test_zero_separation_is_chance_level():
    train = gen_synthetic(10, 5, 1000, 0.0, 2)
    test = gen_synthetic(10, 5, 1000, 0.0, 3)
    spec = ModelSpec("logistic", 5, 10)
    w = np.zeros(spec.dim)
    batch = Batch(train.features, train.labels)
    for _ in range(100):
        w = w - 0.5 * backward(spec, w, batch)
    acc, _ = evaluate(spec, w, test)
    assert abs(acc - 0.1) < 0.05


def test_train_test_split_disjoint():
    ds = gen_synthetic(4, 3, 50, 1.0, 0)
    tr, te = train_test_split(ds, 0.2, 0)
    assert te.n == 40 and tr.n == 160
    rows = {tuple(r) for r in tr.features} & {tuple(r) for r in te.features}
    assert not rows


def test_dataset_rejects_bad_labels():
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((2, 2)), np.array([0, 3]), 3)
    with pytest.raises(ValueError):
        LabeledDataset(np.array([[np.nan, 0.0]]), np.array([0]), 2)


# -- IDX ---------------------------------------------------------------------


def _write(path, data):
    path.write_bytes(data)
    return path


def test_idx_hand_encoded_roundtrip(tmp_path):
    img = _write(tmp_path / "img", struct.pack(">IIII", 0x803, 2, 2, 2) + bytes([0, 255, 51, 102, 255, 0, 0, 255]))
    lab = _write(tmp_path / "lab", struct.pack(">II", 0x801, 2) + bytes([3, 1]))
    ds = load_idx(img, lab, n_classes=10)
    assert ds.features.shape == (2, 4)
    assert np.array_equal(ds.features[0], [0.0, 1.0, 0.2, 0.4])
    assert np.array_equal(ds.features[1], [1.0, 0.0, 0.0, 1.0])
    assert ds.labels.tolist() == [3, 1]


def test_idx_bad_magic(tmp_path):
    img = _write(tmp_path / "img", struct.pack(">IIII", 0x804, 1, 1, 1) + b"\x00")
    lab = _write(tmp_path / "lab", struct.pack(">II", 0x801, 1) + b"\x00")
    with pytest.raises(IdxMagicError):
        load_idx(img, lab)


def test_idx_count_mismatch(tmp_path):
    img = _write(tmp_path / "img", struct.pack(">IIII", 0x803, 2, 1, 1) + b"\x00\x01")
    lab = _write(tmp_path / "lab", struct.pack(">II", 0x801, 3) + b"\x00\x01\x00")
    with pytest.raises(IdxCountMismatchError):
        load_idx(img, lab)


def test_idx_truncated(tmp_path):
    img = _write(tmp_path / "img", struct.pack(">IIII", 0x803, 2, 2, 2) + b"\x00" * 5)
    lab = _write(tmp_path / "lab", struct.pack(">II", 0x801, 2) + b"\x00\x01")
    with pytest.raises(IdxTruncatedError):
        load_idx(img, lab)
    with pytest.raises(IdxTruncatedError):
        load_idx(_write(tmp_path / "short", b"\x00\x00"), lab)


def test_write_idx_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, (5, 3, 4), dtype=np.uint8)
    labels = np.array([0, 1, 2, 1, 0], dtype=np.uint8)
    write_idx(tmp_path / "i", tmp_path / "l", images, labels)
    ds = load_idx(tmp_path / "i", tmp_path / "l")
    assert np.array_equal(ds.features, images.reshape(5, 12) / 255.0)
    assert ds.n_classes == 3


# -- partitioning ------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(st.floats(0.005, 100.0), st.integers(0, 10_000), st.integers(2, 30))
def test_dirichlet_partition_law(alpha, seed, n_clients):
    ds = gen_synthetic(5, 2, 20, 1.0, 0)
    plan = partition_dirichlet(ds, n_clients, alpha, seed)
    assert plan.n_clients == n_clients
    assert_partition(plan, ds.n)


def test_dirichlet_deterministic():
    ds = gen_synthetic(5, 2, 20, 1.0, 0)
    a, b = partition_dirichlet(ds, 7, 0.3, 5), partition_dirichlet(ds, 7, 0.3, 5)
    assert all(np.array_equal(x, y) for x, y in zip(a.assignments, b.assignments))


def test_dirichlet_large_alpha_matches_global():
    ds = gen_synthetic(10, 2, 500, 1.0, 0)
    glob = ds.label_counts() / ds.n
    worst = 0.0
    for seed in range(20):
        plan = partition_dirichlet(ds, 10, 1e6, seed)
        worst = max(worst, np.max(np.abs(plan.class_proportions - glob)))
    assert worst < 0.02


def test_dirichlet_small_alpha_lowers_entropy():
    ds = gen_synthetic(10, 2, 500, 1.0, 0)

    def mean_entropy(alpha):
        return np.mean([np.mean([entropy(p) for p in partition_dirichlet(ds, 100, alpha, s).class_proportions])
                        for s in range(20)])

    assert mean_entropy(0.01) < 0.25 * mean_entropy(1e6)


def test_dirichlet_rejects_infeasible():
    ds = gen_synthetic(2, 2, 2, 1.0, 0)
    with pytest.raises(ValueError):
        partition_dirichlet(ds, 5, 1.0, 0)
    with pytest.raises(ValueError):
        partition_dirichlet(ds, 2, 0.0, 0)
    with pytest.raises(ValueError):
        partition_dirichlet(ds, 1, 1.0, 0)


def test_iid_equal_sizes_and_coverage():
    ds = gen_synthetic(4, 2, 25, 1.0, 0)
    plan = partition_iid(ds, 10, 3)
    assert set(plan.sizes.tolist()) == {10}
    assert_partition(plan, ds.n)
    uneven = partition_iid(ds, 7, 3)
    assert uneven.sizes.max() - uneven.sizes.min() <= 1
    assert_partition(uneven, ds.n)


def test_iid_proportions_within_multinomial_bounds():
    ds = gen_synthetic(10, 2, 1000, 1.0, 0)
    plan = partition_iid(ds, 10, 1)
    glob = ds.label_counts() / ds.n
    n_k = plan.sizes[:, None]
    sigma = np.sqrt(glob * (1 - glob) / n_k)
    assert np.all(np.abs(plan.class_proportions - glob) <= 3 * sigma)


def test_external_plan(tmp_path):
    ds = gen_synthetic(2, 2, 3, 1.0, 0)
    (tmp_path / "plan.json").write_text('{"assignments": [[0, 1, 2], [3, 4, 5]]}')
    plan = load_plan(tmp_path / "plan.json", ds)
    assert plan.n_clients == 2 and plan.alpha == "external"
    (tmp_path / "bad.json").write_text('{"assignments": [[0, 1, 2], [2, 4, 5]]}')
    with pytest.raises(ValueError):
        load_plan(tmp_path / "bad.json", ds)


# -- drift-isolation views ---------------------------------------------------


def _multiset(views):
    return sorted(np.concatenate([v.index for v in views]).tolist())


def test_period_only_conserves_examples():
    ds = gen_synthetic(10, 2, 50, 1.0, 0)
    plan = partition_dirichlet(ds, 20, 0.05, 1)
    sampled = [1, 4, 7, 12, 19]
    views = drift_isolation_view("period_only", plan, ds, sampled, 99)
    own = sorted(np.concatenate([plan.assignments[k] for k in sampled]).tolist())
    assert _multiset(views) == own
    sizes = [v.n for v in views]
    assert max(sizes) - min(sizes) <= 1


def test_period_only_even_redeal_of_identical_shards():
    # every client holds 3 examples of each of 4 classes
    labels = np.tile(np.repeat(np.arange(4), 3), 5)
    ds = LabeledDataset(np.zeros((labels.shape[0], 1)), labels, 4)
    assignments = [np.arange(12 * k, 12 * (k + 1)) for k in range(5)]
    plan = PartitionPlan.build(assignments, labels, 4, "hand")
    views = drift_isolation_view("period_only", plan, ds, [0, 2, 3], 5)
    hist = np.stack([v.label_counts() for v in views])
    assert np.all(hist.max(axis=0) - hist.min(axis=0) <= 1)


def test_both_and_none_return_own_shards():
    ds = gen_synthetic(3, 2, 10, 1.0, 0)
    plan = partition_iid(ds, 6, 0)
    for mode in ("both", "none"):
        views = drift_isolation_view(mode, plan, ds, [2, 5], 0)
        assert np.array_equal(views[0].index, plan.assignments[2])
        assert np.array_equal(views[1].index, plan.assignments[5])


def test_client_only_keeps_pool_but_skews_clients():
    ds = gen_synthetic(10, 2, 200, 1.0, 0)
    plan = partition_iid(ds, 100, 0)
    ent_none, ent_client = [], []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        sampled = sorted(rng.choice(100, 10, replace=False).tolist())
        base = drift_isolation_view("none", plan, ds, sampled, seed)
        skew = drift_isolation_view("client_only", plan, ds, sampled, seed)
        pooled = sum(v.label_counts() for v in base)
        assert np.array_equal(sum(v.label_counts() for v in skew), pooled)
        assert _multiset(skew) == _multiset(base)
        assert all(v.n >= 1 for v in skew)
        ent_none.append(np.mean([entropy(v.label_counts() / v.n) for v in base]))
        ent_client.append(np.mean([entropy(v.label_counts() / v.n) for v in skew]))
    assert np.mean(ent_client) < 0.5 * np.mean(ent_none)


def test_view_is_deterministic_per_round_seed():
    ds = gen_synthetic(5, 2, 30, 1.0, 0)
    plan = partition_dirichlet(ds, 10, 0.1, 0)
    a = drift_isolation_view("period_only", plan, ds, [0, 3, 4], 17)
    b = drift_isolation_view("period_only", plan, ds, [0, 3, 4], 17)
    assert all(np.array_equal(x.index, y.index) for x, y in zip(a, b))


def test_view_rejects_empty_sample_and_bad_mode():
    ds = gen_synthetic(2, 2, 5, 1.0, 0)
    plan = partition_iid(ds, 2, 0)
    with pytest.raises(ValueError):
        drift_isolation_view("both", plan, ds, [], 0)
    with pytest.raises(ValueError):
        drift_isolation_view("sideways", plan, ds, [0], 0)
    with pytest.raises(ValueError):
        drift_isolation_view("both", plan, ds, [2], 0)


# -- heterogeneity -----------------------------------------------------------


def _plan_from_labels(per_client_labels, n_classes):
    labels = np.concatenate(per_client_labels)
    bounds = np.cumsum([0] + [len(x) for x in per_client_labels])
    assignments = [np.arange(bounds[i], bounds[i + 1]) for i in range(len(per_client_labels))]
    return PartitionPlan.build(assignments, labels, n_classes, "hand")


def test_H_zero_for_identical_clients():
    plan = _plan_from_labels([np.array([0, 1, 1]), np.array([1, 0, 1]), np.array([1, 1, 0])], 2)
    assert heterogeneity_H(plan) == 0.0


def test_H_two_pure_clients():
    plan = _plan_from_labels([np.array([0, 0]), np.array([1, 1])], 2)
    assert heterogeneity_H(plan) == pytest.approx(0.25, abs=1e-15)


def test_H_invariant_to_client_relabeling():
    ds = gen_synthetic(5, 2, 40, 1.0, 0)
    plan = partition_dirichlet(ds, 8, 0.2, 3)
    perm = np.random.default_rng(0).permutation(8)
    shuffled = PartitionPlan.build([plan.assignments[k] for k in perm], ds.labels, 5, plan.alpha)
    assert heterogeneity_H(shuffled) == pytest.approx(heterogeneity_H(plan), rel=1e-12)


def test_H_decreases_with_alpha():
    ds = gen_synthetic(10, 2, 500, 1.0, 0)
    means = [np.mean([heterogeneity_H(partition_dirichlet(ds, 100, a, s)) for s in range(20)])
             for a in (0.01, 0.1, 1.0, 100.0)]
    assert all(x > y for x, y in zip(means, means[1:]))
