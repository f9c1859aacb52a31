import itertools

import numpy as np
import pytest

from pushcen import clustering
from pushcen.clustering import (
    LloydResult,
    get_backend,
    lloyd_zero_anchored,
    random_init,
    sort_remap,
)


def brute_force_distortion(theta: np.ndarray, k: int) -> float:
    """Exact optimum of zero-anchored clustering by enumerating all
    assignments of points to k slots (slot 0 value fixed at 0, others free).

    Feasible only for tiny instances; serves as the independent oracle.
    """
    n = len(theta)
    best = float("inf")
    for labels in itertools.product(range(k), repeat=n):
        labels = np.asarray(labels)
        cost = 0.0
        for slot in range(k):
            pts = theta[labels == slot]
            if len(pts) == 0:
                continue
            center = 0.0 if slot == 0 else pts.mean()
            cost += float(((pts - center) ** 2).sum())
        best = min(best, cost)
    return best


def test_backend_is_available():
    assert clustering.BACKEND in ("cython", "numpy")
    assert get_backend("numpy") is not None


def test_backends_agree_exactly():
    try:
        cy = get_backend("cython")
    except RuntimeError:
        pytest.skip("compiled kernels not built")
    np_ = get_backend("numpy")
    rng = np.random.default_rng(3)
    for _ in range(20):
        theta = rng.standard_normal(rng.integers(1, 500))
        mu = np.sort(rng.standard_normal(8))
        mu[0] = 0.0
        a1 = cy.assign_nearest(theta, mu)
        a2 = np_.assign_nearest(theta, mu)
        np.testing.assert_array_equal(a1, a2)
        s1, c1 = cy.cluster_sums(theta, a1, 8)
        s2, c2 = np_.cluster_sums(theta, a2, 8)
        np.testing.assert_array_equal(c1, c2)
        np.testing.assert_array_equal(s1, s2)


def test_assign_ties_go_to_lowest_index():
    kern = get_backend()
    theta = np.array([0.5])  # exactly between centroids 0.0 and 1.0
    mu = np.array([0.0, 1.0])
    assert kern.assign_nearest(theta, mu)[0] == 0


def test_lloyd_slot_zero_pinned_and_sorted():
    rng = np.random.default_rng(4)
    theta = rng.standard_normal(300)
    res = lloyd_zero_anchored(theta, 8, rng=rng)
    assert res.centroids[0] == 0.0
    assert np.all(np.diff(res.centroids[1:]) >= 0)
    assert res.assign.min() >= 0 and res.assign.max() < 8


def test_lloyd_distortion_nonincreasing_100_instances():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(10, 400))
        theta = rng.standard_normal(n) * float(rng.uniform(0.1, 3))
        res = lloyd_zero_anchored(theta, int(rng.integers(2, 12)), rng=rng)
        d = res.distortions
        assert all(d[i + 1] <= d[i] + 1e-12 for i in range(len(d) - 1)), d


def test_lloyd_matches_brute_force_small_instances():
    rng = np.random.default_rng(6)
    for _ in range(30):
        n = int(rng.integers(2, 9))
        k = int(rng.integers(2, 4))
        theta = rng.standard_normal(n)
        res = lloyd_zero_anchored(theta, k, rng=rng, t_max=50)
        oracle = brute_force_distortion(theta, k)
        # Lloyd can hit a local optimum; it must never beat the true optimum
        assert res.distortions[-1] >= oracle - 1e-9
        assert res.distortions[-1] <= oracle * 1.05 + 1e-9


def test_lloyd_exact_on_separated_clusters():
    # three tight groups around 0, 5, -3: the anchored optimum is obvious
    theta = np.concatenate([
        np.zeros(10),
        np.full(10, 5.0),
        np.full(10, -3.0),
    ])
    res = lloyd_zero_anchored(theta, 3, rng=np.random.default_rng(7), t_max=50)
    np.testing.assert_allclose(sorted(res.centroids), [-3.0, 0.0, 5.0])
    assert res.distortions[-1] == pytest.approx(0.0, abs=1e-12)


def test_lloyd_converges_before_t_max():
    rng = np.random.default_rng(8)
    theta = rng.standard_normal(200)
    res = lloyd_zero_anchored(theta, 4, rng=rng, t_max=100)
    assert res.iterations < 100


def test_lloyd_warm_start_respected():
    theta = np.array([0.1, 0.9, 1.1])
    init = np.array([0.0, 1.0])
    res = lloyd_zero_anchored(theta, 2, init=init)
    assert res.centroids[0] == 0.0
    assert res.centroids[1] == pytest.approx(1.0)


def test_lloyd_rejects_bad_input():
    with pytest.raises(ValueError):
        lloyd_zero_anchored(np.zeros(5), 1, rng=np.random.default_rng(0))
    with pytest.raises(ValueError):
        lloyd_zero_anchored(np.zeros(5), 4)  # no init and no rng
    with pytest.raises(FloatingPointError):
        lloyd_zero_anchored(np.array([1.0, np.nan]), 2, rng=np.random.default_rng(0))
    with pytest.raises(ValueError):
        lloyd_zero_anchored(np.zeros(5), 4, init=np.zeros(3))


def test_empty_cluster_keeps_previous_value():
    # all points near zero: the far-away init centroid gets no members
    theta = np.array([0.01, -0.02, 0.005])
    res = lloyd_zero_anchored(theta, 2, init=np.array([0.0, 100.0]))
    assert res.centroids[1] == pytest.approx(100.0)
    assert np.all(res.assign == 0)


def test_sort_remap_preserves_decoded_values():
    rng = np.random.default_rng(9)
    mu = np.concatenate([[0.0], rng.standard_normal(7)])
    assign = rng.integers(0, 8, size=50)
    new_mu, new_assign = sort_remap(mu, assign)
    np.testing.assert_array_equal(mu[assign], new_mu[new_assign])
    assert new_mu[0] == 0.0
    assert np.all(np.diff(new_mu[1:]) >= 0)


def test_random_init_short_layer_pads():
    theta = np.array([1.0, 2.0])
    mu = random_init(theta, 8, np.random.default_rng(0))
    assert len(mu) == 8
    assert mu[0] == 0.0
    assert set(np.unique(mu)) <= {0.0, 1.0, 2.0}
