"""Pure-numpy fallback for the clustering inner loops.

Mirrors pushcen._ckernels: argmin with first-occurrence tie-breaking and
sequential-order accumulation (np.bincount iterates in input order), so
both backends produce identical results.
"""

from __future__ import annotations

import numpy as np


def assign_nearest(theta: np.ndarray, mu: np.ndarray) -> np.ndarray:
    d = theta[:, None] - mu[None, :]
    return np.argmin(d * d, axis=1).astype(np.int64)


def cluster_sums(theta: np.ndarray, assign: np.ndarray, k: int):
    sums = np.bincount(assign, weights=theta, minlength=k)
    counts = np.bincount(assign, minlength=k).astype(np.int64)
    return sums, counts
