"""Benchmark the compiled clustering kernels against the numpy fallback.

Times the nearest-centroid assignment and cluster-sum kernels, plus the
full zero-anchored Lloyd loop, at a few layer sizes. Also asserts the two
backends agree bit for bit, since the fallback must be a drop-in.

Run:  python benchmarks/bench_clustering.py
"""

from __future__ import annotations

import time

import numpy as np

from pushcen import clustering
from pushcen.clustering import get_backend, lloyd_zero_anchored


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    backends = {"numpy": get_backend("numpy")}
    try:
        backends["cython"] = get_backend("cython")
    except ImportError:
        print("compiled kernels unavailable; benchmarking the fallback only")
    print(f"active backend at import: {clustering.BACKEND}\n")

    rng = np.random.default_rng(7)
    k = 32
    header = f"{'n':>9}  {'kernel':<12}" + "".join(f"{b:>12}" for b in backends)
    print(header)
    for n in (2_048, 65_536, 1_048_576):
        theta = rng.standard_normal(n)
        mu = np.sort(rng.standard_normal(k))
        mu[0] = 0.0
        repeats = max(3, 2_000_000 // n)

        results = {}
        for name, mod in backends.items():
            assign = mod.assign_nearest(theta, mu)
            results[name] = assign
        if len(backends) == 2 and not np.array_equal(results["numpy"], results["cython"]):
            raise AssertionError("backend mismatch in assign_nearest")

        times = {name: _time(lambda m=mod: m.assign_nearest(theta, mu), repeats)
                 for name, mod in backends.items()}
        print(f"{n:>9}  {'assign':<12}" + "".join(f"{times[b] * 1e3:>10.3f}ms" for b in backends))

        assign = results["numpy"]
        if len(backends) == 2:
            s_np = backends["numpy"].cluster_sums(theta, assign, k)
            s_cy = backends["cython"].cluster_sums(theta, assign, k)
            if not (np.array_equal(s_np[0], s_cy[0]) and np.array_equal(s_np[1], s_cy[1])):
                raise AssertionError("backend mismatch in cluster_sums")
        times = {name: _time(lambda m=mod: m.cluster_sums(theta, assign, k), repeats)
                 for name, mod in backends.items()}
        print(f"{n:>9}  {'sums':<12}" + "".join(f"{times[b] * 1e3:>10.3f}ms" for b in backends))

        times = {}
        lloyd_results = {}
        for name in backends:
            lrng = np.random.default_rng(11)
            lloyd_results[name] = lloyd_zero_anchored(theta, k, rng=np.random.default_rng(11),
                                                      backend=name)
            times[name] = _time(
                lambda b=name: lloyd_zero_anchored(
                    theta, k, rng=np.random.default_rng(11), backend=b),
                max(3, repeats // 10),
            )
        if len(backends) == 2 and not np.array_equal(
            lloyd_results["numpy"].centroids, lloyd_results["cython"].centroids
        ):
            raise AssertionError("backend mismatch in lloyd_zero_anchored")
        print(f"{n:>9}  {'lloyd':<12}" + "".join(f"{times[b] * 1e3:>10.3f}ms" for b in backends))
    print("\nbackends agree bit for bit on all checked inputs")


if __name__ == "__main__":
    main()
