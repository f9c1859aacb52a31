"""Zero-anchored scalar k-means (Lloyd iterations) for one weight layer.

Centroid 0 is pinned to exactly 0.0; the remaining K-1 centroids are
refined by alternating nearest-centroid assignment and cluster means.
Empty clusters keep their previous centroid value. The hot loops live in
a compiled extension when available, with a numpy fallback selected at
import time.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

try:
    from . import _ckernels as _kernels

    BACKEND = "cython"
except ImportError:  # extension not built; numpy fallback
    from . import _npkernels as _kernels

    BACKEND = "numpy"

from . import _npkernels


def get_backend(name: str | None = None):
    """Kernel module for the requested backend (None = best available)."""
    if name is None:
        return _kernels
    if name == "numpy":
        return _npkernels
    if name == "cython":
        if BACKEND != "cython":
            raise RuntimeError("compiled kernels are not available")
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


@dataclass
class LloydResult:
    centroids: np.ndarray  # float64, length K, [0] == 0.0, [1:] sorted ascending
    assign: np.ndarray  # int64 indices into centroids
    iterations: int
    distortions: list[float]  # sum of squared residuals after each assignment step


def random_init(theta: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """K-1 distinct values sampled without replacement; short layers pad with max."""
    distinct = np.unique(theta)
    need = k - 1
    if len(distinct) >= need:
        picked = rng.choice(distinct, size=need, replace=False)
    else:
        pad = np.full(need - len(distinct), distinct.max() if len(distinct) else 0.0)
        picked = np.concatenate([distinct, pad])
    return np.concatenate([[0.0], picked])


# cold starts try several inits and keep the lowest final distortion;
# tiny layers enumerate every candidate init subset instead
RANDOM_RESTARTS = 5
ENUMERATE_CAP = 64


def _lloyd_single(theta, k, mu, t_max, kern):
    assign = None
    distortions: list[float] = []
    iterations = 0
    for _ in range(t_max):
        iterations += 1
        new_assign = kern.assign_nearest(theta, mu)
        resid = theta - mu[new_assign]
        distortions.append(float(resid @ resid))
        converged = assign is not None and np.array_equal(new_assign, assign)
        assign = new_assign
        if converged:
            break
        sums, counts = kern.cluster_sums(theta, assign, k)
        nonempty = counts > 0
        nonempty[0] = False  # slot 0 stays pinned
        mu[nonempty] = sums[nonempty] / counts[nonempty]
        mu[0] = 0.0
        # empty clusters keep their previous centroid value
    return mu, assign, iterations, distortions


def _cold_start_inits(theta: np.ndarray, k: int, rng: np.random.Generator):
    distinct = np.unique(theta)
    need = k - 1
    if len(distinct) <= need or math.comb(len(distinct), need) <= ENUMERATE_CAP:
        if len(distinct) <= need:
            return [random_init(theta, k, rng)]
        return [
            np.concatenate([[0.0], distinct[list(combo)]])
            for combo in itertools.combinations(range(len(distinct)), need)
        ]
    return [random_init(theta, k, rng) for _ in range(RANDOM_RESTARTS)]


def lloyd_zero_anchored(
    theta: np.ndarray,
    k: int,
    init: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    t_max: int = 20,
    backend=None,
) -> LloydResult:
    """Run Lloyd iterations with centroid 0 pinned at zero, then canonicalize.

    ``init`` must have length k with init[0] == 0 (warm start, single run).
    When absent, cold-start centroids are drawn from ``theta`` (rng required)
    with restarts; the run with the lowest final distortion wins.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    if not np.all(np.isfinite(theta)):
        raise FloatingPointError("non-finite weights passed to clustering")
    kern = get_backend(backend) if backend is None or isinstance(backend, str) else backend

    if init is not None:
        mu = np.ascontiguousarray(init, dtype=np.float64).copy()
        if mu.shape != (k,):
            raise ValueError(f"init has shape {mu.shape}, expected ({k},)")
        mu[0] = 0.0
        starts = [mu]
    else:
        if rng is None:
            raise ValueError("rng required when no init centroids are given")
        starts = _cold_start_inits(theta, k, rng)

    best = None
    for mu0 in starts:
        run = _lloyd_single(theta, k, mu0, t_max, kern)
        if best is None or run[3][-1] < best[3][-1]:
            best = run

    mu, assign, iterations, distortions = best
    mu, assign = sort_remap(mu, assign)
    return LloydResult(mu, assign, iterations, distortions)


def sort_remap(mu: np.ndarray, assign: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Canonical order: slot 0 fixed at zero, slots 1..K-1 ascending (stable)."""
    order = np.argsort(mu[1:], kind="stable") + 1
    new_mu = np.concatenate([[0.0], mu[order]])
    inverse = np.empty(len(mu), dtype=np.int64)
    inverse[0] = 0
    inverse[order] = np.arange(1, len(mu))
    return new_mu, inverse[assign]
