import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastmelc.approx import (
    ApproxConfig,
    SortCache,
    bin_width,
    build_partition,
    discard_threshold,
    insertion_sort_permutation,
    ip_bin,
    ip_discard,
    retained_pairs,
    sort_cache_update,
    window_bounds,
)
from fastmelc.core import KdeParams, LabeledDataset
from fastmelc.harness.synthetic import gaussian_blobs
from fastmelc.potential import dcs_evaluate, ip_exact

from helpers import random_dataset, unit
from oracles import central_difference, ip_direct


# -- parameter calculators ---------------------------------------------------

def test_discard_threshold_examples():
    assert discard_threshold(1.0, 0.1) == pytest.approx(math.sqrt(-math.log(0.02 * math.pi)), rel=1e-14)
    assert discard_threshold(1.0, 0.1) == pytest.approx(1.6635, abs=5e-5)
    assert discard_threshold(1.0, 1.0) == 0.0
    assert discard_threshold(1.0, 0.0) == math.inf


def test_discard_threshold_p_scaling():
    # smaller p behaves like a proportionally larger epsilon
    assert discard_threshold(0.7, 0.02, 0.5) == discard_threshold(0.7, 0.04, 1.0)


def test_bin_width_examples():
    expected = math.sqrt(-2 * math.log(1 - 0.1 * math.sqrt(2 * math.pi)))
    assert bin_width(1.0, 0.1) == pytest.approx(expected, rel=1e-14)
    assert bin_width(1.0, 0.1) == pytest.approx(0.7597, abs=1e-4)
    assert bin_width(1.0, 0.5) == math.inf
    assert bin_width(1.0, 0.0) == 0.0


@pytest.mark.parametrize("var", [0.05, 0.5, 1.0, 4.0])
def test_bounds_monotone_in_epsilon(var):
    eps = np.geomspace(1e-4, 0.5, 50)
    t = [discard_threshold(var, e) for e in eps]
    b = [bin_width(var, e) for e in eps]
    assert all(x >= y for x, y in zip(t, t[1:]))
    assert all(x <= y for x, y in zip(b, b[1:]))


def test_config_validation():
    with pytest.raises(ValueError):
        ApproxConfig("fast")
    with pytest.raises(ValueError):
        ApproxConfig("bin", -0.1)
    with pytest.raises(ValueError):
        ApproxConfig("discard", 0.1, 0.0)


# -- sort cache --------------------------------------------------------------

def test_sort_cache_identity_update():
    cache = sort_cache_update(None, np.array([3.0, 1.0, 2.0]), np.array([0.0, 1.0]))
    perm = cache.perm_neg.copy()
    cache.update(np.array([3.5, 1.2, 2.1]), np.array([0.1, 1.1]))
    assert cache.last_moves == 0
    np.testing.assert_array_equal(cache.perm_neg, perm)


def test_sort_cache_reversal():
    vals = np.array([0.3, 1.0, 2.0, 5.0, -1.0])
    cache = sort_cache_update(None, vals, vals)
    perm = cache.perm_neg.copy()
    cache.update(-vals, -vals)
    np.testing.assert_array_equal(cache.perm_neg, perm[::-1])


def test_sort_cache_last_moves_to_front():
    cache = sort_cache_update(None, np.array([0.5, 1.5, 2.5]), np.array([1.0, 2.0, 3.0]))
    new_neg, new_pos = np.array([2.6, 1.4, 0.4]), np.array([1.0, 2.0, 0.0])
    cache.update(new_neg, new_pos)
    np.testing.assert_array_equal(cache.perm_neg, np.argsort(new_neg, kind="stable"))
    np.testing.assert_array_equal(cache.perm_pos, np.argsort(new_pos, kind="stable"))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=1, max_size=60), st.randoms(use_true_random=False),
       st.integers(0, 200))
def test_insertion_sort_matches_stable_sort(values, rnd, budget):
    values = np.array(values, dtype=float)
    perm = list(range(len(values)))
    rnd.shuffle(perm)
    perm = np.array(perm)
    expected = perm[np.argsort(values[perm], kind="stable")]
    got, _ = insertion_sort_permutation(values, perm)
    np.testing.assert_array_equal(got, expected)
    # the move budget fallback gives the identical permutation
    got_budget, _ = insertion_sort_permutation(values, perm, max_moves=budget)
    np.testing.assert_array_equal(got_budget, expected)


# -- sort and discard --------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=30),
       st.lists(st.floats(-10, 10), min_size=1, max_size=30),
       st.floats(0.0, 5.0))
def test_window_bounds_brute_force(a, b, threshold):
    sa, sb = np.sort(a), np.sort(b)
    lo, hi = window_bounds(sa, sb, threshold)
    for i, x in enumerate(sa):
        inside = [j for j, y in enumerate(sb) if abs(x - y) <= threshold]
        assert list(range(lo[i], hi[i])) == inside


def test_retained_pairs_brute_force(rng):
    for _ in range(20):
        a = rng.standard_normal(int(rng.integers(1, 40)))
        b = rng.standard_normal(int(rng.integers(1, 40)))
        t = float(rng.uniform(0.05, 1.5))
        kept = retained_pairs(a, b, t)
        expected = {(i, j) for i in range(len(a)) for j in range(len(b)) if abs(a[i] - b[j]) <= t}
        if kept is None:
            assert len(expected) == len(a) * len(b)
        else:
            assert set(zip(kept[0].tolist(), kept[1].tolist())) == expected


def test_discard_threshold_zero_drops_everything():
    pv, st_ = ip_discard([0.0, 1.0], [0.0, 0.5], 1.0, epsilon=1.0)
    assert st_.threshold == 0.0
    assert pv.value == 0.0 and pv.exp_calls == 0
    assert st_.pairs_discarded == 4


def test_discard_nothing_dropped():
    pv, st_ = ip_discard([0.0], [0.0, 10.0], 1.0, epsilon=1e-30)
    assert 10 < st_.threshold < math.inf
    assert pv.value == ip_exact([0.0], [0.0, 10.0], 1.0).value
    assert pv.exp_calls == 2


def test_discard_drops_far_pair():
    eps = math.sqrt(math.exp(-25.0) / (2 * math.pi))  # gives T = 5 at V = 1
    pv, st_ = ip_discard([0.0], [0.0, 10.0], 1.0, eps)
    assert st_.threshold == pytest.approx(5.0, rel=1e-12)
    exact = ip_direct([0.0], [0.0, 10.0], 1.0)
    assert pv.value == pytest.approx(0.19947, abs=5e-6)
    assert abs(pv.value - exact) <= 1e-22
    assert (pv.exp_calls, st_.pairs_discarded, st_.pairs_retained) == (1, 1, 1)


def test_discard_boundary_tie_retained():
    eps = math.sqrt(math.exp(-25.0) / (2 * math.pi))
    t = discard_threshold(1.0, eps)
    pv, st_ = ip_discard([0.0], [t], 1.0, eps)
    assert st_.pairs_retained == 1


def test_discard_error_bound(rng):
    for _ in range(30):
        a = rng.standard_normal(int(rng.integers(2, 80))) * rng.uniform(0.2, 3)
        b = rng.standard_normal(int(rng.integers(2, 80))) + rng.uniform(-2, 2)
        var = float(rng.uniform(0.01, 2))
        for eps in (0.01, 0.05, 0.1):
            approx, _ = ip_discard(a, b, var, eps)
            assert abs(approx.value - ip_exact(a, b, var).value) <= eps


def test_refine_p_discards_at_least_as_much(rng):
    a = rng.standard_normal(200)
    b = rng.standard_normal(200) + 1
    _, plain = ip_discard(a, b, 0.05, 0.01)
    _, refined = ip_discard(a, b, 0.05, 0.01, refine_p=True)
    assert refined.threshold <= plain.threshold
    assert refined.pairs_discarded >= plain.pairs_discarded


# -- binning -----------------------------------------------------------------

def test_bin_lossless_when_points_coincide():
    pv, part = ip_bin([0.0, 0.0], [1.0], [[0.0], [0.0]], [[1.0]], 1.0, 0.1)
    assert part.width == pytest.approx(0.7597, abs=1e-4)
    assert part.anchor == 0.0
    np.testing.assert_array_equal(part.a.count, [2])
    assert pv.value == pytest.approx(2 * math.exp(-0.5) / (math.sqrt(2 * math.pi) * 2), rel=1e-14)
    assert pv.value == pytest.approx(ip_exact([0.0, 0.0], [1.0], 1.0).value, rel=1e-14)


def test_bin_merges_nearby_points():
    # width 0.5 at V = 1 needs 1 - eps sqrt(2 pi) = exp(-0.125)
    eps = (1 - math.exp(-0.125)) / math.sqrt(2 * math.pi)
    pv, part = ip_bin([0.0, 0.4], [1.0], [[0.0], [0.4]], [[1.0]], 1.0, eps)
    assert part.width == pytest.approx(0.5, rel=1e-12)
    np.testing.assert_allclose(part.a.rep_projection, [0.2])
    np.testing.assert_array_equal(part.a.count, [2])
    assert pv.value == pytest.approx(math.exp(-0.32) / math.sqrt(2 * math.pi), rel=1e-14)
    assert pv.value == pytest.approx(0.2896, abs=1e-4)
    exact = ip_direct([0.0, 0.4], [1.0], 1.0)
    assert exact == pytest.approx(0.2876, abs=1e-4)
    assert (pv.exp_calls, pv.naive_pairs) == (1, 2)


def test_bin_single_bin_collapse(rng):
    a = rng.standard_normal(20)
    b = rng.standard_normal(15) + 1
    pa, pb = a[:, None], b[:, None]
    pv, part = ip_bin(a, b, pa, pb, 1.0, 0.5)
    assert part.width == math.inf
    assert pv.exp_calls == 1
    expected = math.exp(-(a.mean() - b.mean()) ** 2 / 2) / math.sqrt(2 * math.pi)
    assert pv.value == pytest.approx(expected, rel=1e-12)


def test_partition_invariants(rng):
    for _ in range(20):
        d = int(rng.integers(1, 6))
        pa = rng.standard_normal((int(rng.integers(2, 60)), d))
        pb = rng.standard_normal((int(rng.integers(2, 60)), d)) + 0.5
        v = rng.standard_normal(d)
        a, b = pa @ v, pb @ v
        width = float(rng.uniform(0.05, 1.0))
        part = build_partition(a, b, pa, pb, width)
        assert part.anchor == min(a.min(), b.min())
        for proj, pts, cb in ((a, pa, part.a), (b, pb, part.b)):
            assert cb.count.sum() == len(proj)
            lo = part.anchor + cb.grid_index[cb.assignment] * width
            assert np.all(lo <= proj + 1e-12) and np.all(proj < lo + width + 1e-12)
            np.testing.assert_allclose(cb.rep_projection, cb.rep_point @ v, rtol=1e-12, atol=1e-12)


def test_zero_epsilon_reduces_to_exact(rng):
    for _ in range(10):
        d = 3
        pa = np.round(rng.standard_normal((30, d)), 1)
        pb = np.round(rng.standard_normal((25, d)), 1)
        v = np.array([1.0, 0.0, 0.0])
        a, b = pa @ v, pb @ v
        exact = ip_exact(a, b, 0.3).value
        assert ip_discard(a, b, 0.3, 0.0)[0].value == exact
        assert ip_bin(a, b, pa, pb, 0.3, 0.0)[0].value == pytest.approx(exact, rel=1e-12)


# -- objective-level checks --------------------------------------------------

@pytest.mark.parametrize("mode", ["discard", "bin"])
def test_frozen_partition_gradients(mode):
    rng = np.random.default_rng(3)
    for _ in range(10):
        ds = random_dataset(rng, int(rng.integers(10, 40)), int(rng.integers(10, 40)))
        v = unit(rng, ds.dim) * rng.uniform(0.5, 2)
        params = KdeParams(float(rng.choice([0.5, 1.0, 2.0])))
        cfg = ApproxConfig(mode, float(rng.choice([0.01, 0.05, 0.1])))
        res = dcs_evaluate(ds, v, params, cfg)
        if not math.isfinite(res.value):
            continue
        step = 1e-6 * max(1.0, float(np.linalg.norm(v)))
        fd = central_difference(
            lambda u: dcs_evaluate(ds, np.array(u), params, cfg, want_gradient=False,
                                   frozen=res.partitions).value, v, step)
        np.testing.assert_allclose(res.gradient, fd, rtol=1e-5, atol=1e-8)


def test_frozen_evaluation_reproduces_value(rng):
    ds = random_dataset(rng, 30, 30, 3)
    v = unit(rng, 3)
    for mode in ("discard", "bin"):
        cfg = ApproxConfig(mode, 0.05)
        res = dcs_evaluate(ds, v, KdeParams(), cfg)
        again = dcs_evaluate(ds, v, KdeParams(), cfg, frozen=res.partitions)
        assert again.value == pytest.approx(res.value, rel=1e-13)


def test_cost_ordering_on_dense_blobs():
    ds = gaussian_blobs(300, 3, 2.0, seed=5)
    rng = np.random.default_rng(8)
    for _ in range(5):
        v = unit(rng, 3)
        for eps in (0.01, 0.05, 0.1):
            d = dcs_evaluate(ds, v, KdeParams(1.0), ApproxConfig("discard", eps), want_gradient=False)
            b = dcs_evaluate(ds, v, KdeParams(1.0), ApproxConfig("bin", eps), want_gradient=False)
            assert b.stats.exp_calls <= d.stats.exp_calls <= d.stats.naive_pairs


def test_discard_uses_sort_cache(rng):
    ds = random_dataset(rng, 40, 40, 3)
    cache = SortCache()
    v = unit(rng, 3)
    cfg = ApproxConfig("discard", 0.05)
    first = dcs_evaluate(ds, v, KdeParams(), cfg, cache=cache)
    second = dcs_evaluate(ds, v + 1e-4, KdeParams(), cfg, cache=cache)
    cold = dcs_evaluate(ds, v + 1e-4, KdeParams(), cfg)
    assert cache.last_projections is not None
    assert second.value == pytest.approx(cold.value, rel=1e-13)
    assert first.stats.exp_calls < first.stats.naive_pairs
