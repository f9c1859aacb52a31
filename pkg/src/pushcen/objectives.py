"""Desk-scale objective families with analytic gradients.

Three families share one interface over flat parameter vectors: a
least-squares quadratic, multinomial logistic regression, and a tiny
one-hidden-layer tanh MLP. Matrix-shaped weight blocks are flagged
compressible in the layout; bias vectors are not.
"""

from __future__ import annotations

import numpy as np

from .params import LayerLayout


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    n = len(labels)
    return float(-np.log(np.clip(probs[np.arange(n), labels], 1e-12, None)).mean())


class QuadraticObjective:
    """f(w; batch) = ||X w - y||^2 / (2 |batch|), a convex test objective."""

    def __init__(self, dim: int):
        self.dim = dim
        self.layout = LayerLayout((("weights", dim, True),))

    def loss_grad(self, w, X, y):
        r = X @ w - y
        n = len(y)
        return float(r @ r) / (2 * n), X.T @ r / n

    def loss(self, w, X, y):
        return self.loss_grad(w, X, y)[0]

    def predict(self, w, X):
        return X @ w

    def smoothness(self, X) -> float:
        # largest eigenvalue of X^T X / n
        return float(np.linalg.eigvalsh(X.T @ X / len(X)).max())


class LogisticObjective:
    """Multinomial logistic regression: d features, C classes."""

    def __init__(self, n_features: int, n_classes: int):
        self.n_features = n_features
        self.n_classes = n_classes
        self.layout = LayerLayout(
            (
                ("weights", n_features * n_classes, True),
                ("bias", n_classes, False),
            )
        )

    def _unpack(self, w):
        d, c = self.n_features, self.n_classes
        return w[: d * c].reshape(d, c), w[d * c :]

    def loss_grad(self, w, X, y):
        W, b = self._unpack(w)
        probs = _softmax(X @ W + b)
        n = len(y)
        delta = probs.copy()
        delta[np.arange(n), y] -= 1.0
        delta /= n
        grad = np.concatenate([(X.T @ delta).ravel(), delta.sum(axis=0)])
        return _cross_entropy(probs, y), grad

    def loss(self, w, X, y):
        W, b = self._unpack(w)
        return _cross_entropy(_softmax(X @ W + b), y)

    def predict(self, w, X):
        W, b = self._unpack(w)
        return np.argmax(X @ W + b, axis=1)


class MLPObjective:
    """One-hidden-layer tanh network: d -> h -> C with softmax output."""

    def __init__(self, n_features: int, n_hidden: int, n_classes: int):
        self.n_features = n_features
        self.n_hidden = n_hidden
        self.n_classes = n_classes
        self.layout = LayerLayout(
            (
                ("w1", n_features * n_hidden, True),
                ("b1", n_hidden, False),
                ("w2", n_hidden * n_classes, True),
                ("b2", n_classes, False),
            )
        )

    def _unpack(self, w):
        d, h, c = self.n_features, self.n_hidden, self.n_classes
        i = 0
        w1 = w[i : i + d * h].reshape(d, h); i += d * h
        b1 = w[i : i + h]; i += h
        w2 = w[i : i + h * c].reshape(h, c); i += h * c
        b2 = w[i : i + c]
        return w1, b1, w2, b2

    def _forward(self, w, X):
        w1, b1, w2, b2 = self._unpack(w)
        hidden = np.tanh(X @ w1 + b1)
        return hidden, hidden @ w2 + b2

    def loss_grad(self, w, X, y):
        w1, b1, w2, b2 = self._unpack(w)
        hidden, logits = self._forward(w, X)
        probs = _softmax(logits)
        n = len(y)
        delta = probs.copy()
        delta[np.arange(n), y] -= 1.0
        delta /= n
        g_w2 = hidden.T @ delta
        g_b2 = delta.sum(axis=0)
        back = (delta @ w2.T) * (1.0 - hidden**2)
        g_w1 = X.T @ back
        g_b1 = back.sum(axis=0)
        grad = np.concatenate([g_w1.ravel(), g_b1, g_w2.ravel(), g_b2])
        return _cross_entropy(probs, y), grad

    def loss(self, w, X, y):
        _, logits = self._forward(w, X)
        return _cross_entropy(_softmax(logits), y)

    def predict(self, w, X):
        _, logits = self._forward(w, X)
        return np.argmax(logits, axis=1)


def make_objective(kind: str, n_features: int, n_classes: int, n_hidden: int = 64):
    if kind == "logistic":
        return LogisticObjective(n_features, n_classes)
    if kind == "mlp":
        return MLPObjective(n_features, n_hidden, n_classes)
    if kind == "quadratic":
        return QuadraticObjective(n_features)
    raise ValueError(f"unknown objective kind {kind!r}")


def init_params(objective, rng: np.random.Generator, scale: float = 0.1) -> np.ndarray:
    return scale * rng.standard_normal(objective.layout.total_length)
