import numpy as np
import pytest

from pushcen.data import (
    ConfigError,
    DataSpec,
    class_means,
    generate,
    load_shards,
    local_eval,
    save_shards,
)
from pushcen.objectives import make_objective


def test_spec_validation():
    with pytest.raises(ConfigError):
        DataSpec(alpha=0.0)
    with pytest.raises(ConfigError):
        DataSpec(test_fraction=0.0)
    with pytest.raises(ConfigError):
        DataSpec(samples_per_client=3, test_fraction=0.2)  # no test samples
    with pytest.raises(ConfigError):
        class_means(DataSpec(n_features=4, n_classes=10))


def test_partition_shapes_and_split():
    spec = DataSpec(n_clients=5, samples_per_client=50, test_fraction=0.2, seed=1)
    shards = generate(spec)
    assert len(shards) == 5
    for s in shards:
        assert len(s.train_y) == 40
        assert len(s.test_y) == 10
        assert s.train_x.shape == (40, spec.n_features)
        # no cross-contamination: train+test exhaust the client pool
        assert len(s.train_y) + len(s.test_y) == spec.samples_per_client


def test_determinism():
    spec = DataSpec(seed=7)
    a, b = generate(spec), generate(spec)
    for sa, sb in zip(a, b):
        np.testing.assert_array_equal(sa.train_x, sb.train_x)
        np.testing.assert_array_equal(sa.test_y, sb.test_y)


def test_different_seeds_differ():
    a = generate(DataSpec(seed=0))
    b = generate(DataSpec(seed=1))
    assert not np.array_equal(a[0].train_x, b[0].train_x)


def test_alpha_controls_skew():
    """Smaller alpha concentrates each client's labels on fewer classes."""
    def mean_entropy(alpha):
        shards = generate(DataSpec(alpha=alpha, seed=3, n_clients=30))
        ents = []
        for s in shards:
            counts = np.bincount(np.concatenate([s.train_y, s.test_y]), minlength=10)
            p = counts / counts.sum()
            p = p[p > 0]
            ents.append(-(p * np.log(p)).sum())
        return np.mean(ents)

    assert mean_entropy(0.1) < mean_entropy(1.0) < mean_entropy(100.0)


def test_class_means_scaled_basis():
    spec = DataSpec(mean_scale=2.5)
    means = class_means(spec)
    assert means.shape == (10, 32)
    np.testing.assert_allclose(np.linalg.norm(means, axis=1), 2.5)


def test_local_eval_bounds():
    spec = DataSpec(seed=0)
    shards = generate(spec)
    obj = make_objective("logistic", spec.n_features, spec.n_classes)
    rng = np.random.default_rng(0)
    w = 0.01 * rng.standard_normal(obj.layout.total_length)
    for s in shards[:5]:
        loss, acc = local_eval(obj, w, s)
        assert np.isfinite(loss)
        assert 0.0 <= acc <= 1.0


def test_separable_data_is_learnable():
    spec = DataSpec(seed=0, mean_scale=6.0, alpha=100.0, samples_per_client=200)
    shards = generate(spec)
    obj = make_objective("logistic", spec.n_features, spec.n_classes)
    rng = np.random.default_rng(0)
    w = np.zeros(obj.layout.total_length)
    X = np.concatenate([s.train_x for s in shards])
    y = np.concatenate([s.train_y for s in shards])
    for _ in range(30):
        _, g = obj.loss_grad(w, X, y)
        w -= 0.5 * g
    accs = [local_eval(obj, w, s)[1] for s in shards]
    assert np.mean(accs) > 0.9


def test_shard_dump_load_roundtrip(tmp_path):
    shards = generate(DataSpec(seed=5, n_clients=3, samples_per_client=20))
    path = tmp_path / "shards.bin"
    save_shards(path, shards)
    loaded = load_shards(path)
    assert len(loaded) == 3
    for a, b in zip(shards, loaded):
        np.testing.assert_allclose(a.train_x, b.train_x, atol=1e-6)  # float32 file
        np.testing.assert_array_equal(a.train_y, b.train_y)
        np.testing.assert_array_equal(a.test_y, b.test_y)


def test_shard_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 10)
    with pytest.raises(ConfigError):
        load_shards(path)
