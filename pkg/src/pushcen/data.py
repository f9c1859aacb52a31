"""Heterogeneous synthetic shards with Dirichlet-controlled class skew.

Samples are drawn from a Gaussian mixture with one mean per class (class
means sit on a scaled simplex, isotropic unit noise). Each client draws a
class-proportion vector from Dirichlet(alpha * 1) and samples its labels
from it, so smaller alpha gives more skewed client distributions. Each
shard carries its own train/test split.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

SHARD_MAGIC = b"PCSH"
SHARD_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataSpec:
    n_clients: int = 20
    n_classes: int = 10
    n_features: int = 32
    samples_per_client: int = 250
    alpha: float = 0.4
    seed: int = 0
    test_fraction: float = 0.2
    mean_scale: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test fraction must lie in (0, 1)")
        if int(self.samples_per_client * self.test_fraction) < 1:
            raise ConfigError("spec leaves no test samples per client")


@dataclass
class ClientShard:
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray


def class_means(spec: DataSpec) -> np.ndarray:
    """One mean per class: scaled standard-basis vertices in feature space."""
    if spec.n_features < spec.n_classes:
        raise ConfigError("need at least as many features as classes")
    means = np.zeros((spec.n_classes, spec.n_features))
    means[np.arange(spec.n_classes), np.arange(spec.n_classes)] = spec.mean_scale
    return means


def generate(spec: DataSpec) -> list[ClientShard]:
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0xDA7A]))
    means = class_means(spec)
    shards = []
    n_test = int(spec.samples_per_client * spec.test_fraction)
    for _ in range(spec.n_clients):
        props = rng.dirichlet(np.full(spec.n_classes, spec.alpha))
        labels = rng.choice(spec.n_classes, size=spec.samples_per_client, p=props)
        features = means[labels] + rng.standard_normal((spec.samples_per_client, spec.n_features))
        perm = rng.permutation(spec.samples_per_client)
        test_idx, train_idx = perm[:n_test], perm[n_test:]
        shards.append(
            ClientShard(
                features[train_idx], labels[train_idx],
                features[test_idx], labels[test_idx],
            )
        )
    return shards


def local_eval(objective, w_values: np.ndarray, shard: ClientShard) -> tuple[float, float]:
    """(mean loss, top-1 accuracy) on the shard's local test set."""
    if len(shard.test_y) == 0:
        raise ConfigError("empty test set")
    loss = objective.loss(w_values, shard.test_x, shard.test_y)
    pred = objective.predict(w_values, shard.test_x)
    return float(loss), float(np.mean(pred == shard.test_y))


# -- shard dump/load (versioned binary, row-major float32) --------------


def save_shards(path, shards: list[ClientShard]) -> None:
    with open(path, "wb") as fh:
        fh.write(SHARD_MAGIC)
        fh.write(struct.pack("<HI", SHARD_VERSION, len(shards)))
        for s in shards:
            fh.write(
                struct.pack(
                    "<IIII", len(s.train_y), len(s.test_y),
                    s.train_x.shape[1], s.test_x.shape[1],
                )
            )
            fh.write(s.train_x.astype(np.float32).tobytes())
            fh.write(s.train_y.astype(np.int32).tobytes())
            fh.write(s.test_x.astype(np.float32).tobytes())
            fh.write(s.test_y.astype(np.int32).tobytes())


def load_shards(path) -> list[ClientShard]:
    with open(path, "rb") as fh:
        if fh.read(4) != SHARD_MAGIC:
            raise ConfigError("not a shard file")
        version, count = struct.unpack("<HI", fh.read(6))
        if version != SHARD_VERSION:
            raise ConfigError(f"unsupported shard file version {version}")
        shards = []
        for _ in range(count):
            n_train, n_test, d_train, d_test = struct.unpack("<IIII", fh.read(16))
            train_x = np.frombuffer(fh.read(4 * n_train * d_train), dtype=np.float32)
            train_y = np.frombuffer(fh.read(4 * n_train), dtype=np.int32)
            test_x = np.frombuffer(fh.read(4 * n_test * d_test), dtype=np.float32)
            test_y = np.frombuffer(fh.read(4 * n_test), dtype=np.int32)
            shards.append(
                ClientShard(
                    train_x.reshape(n_train, d_train).astype(np.float64),
                    train_y.astype(np.int64),
                    test_x.reshape(n_test, d_test).astype(np.float64),
                    test_y.astype(np.int64),
                )
            )
        return shards
