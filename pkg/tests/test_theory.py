import itertools

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tdshap.baselines import exact_shapley
from tdshap.learners import LearnerSpec
from tdshap.metrics import Utility
from tdshap.theory import (complexity, complexity_upper, failure_bound, satisfies_sufficient,
                           sufficient_iterations, theory_report, width_bound, width_bound_tree)

from conftest import with_split

mpmath.mp.dps = 50


def mp_satisfies(T, N, w, eps):
    T = mpmath.mpf(T)
    return T >= 64 * N * mpmath.mpf(w) ** 2 / mpmath.mpf(eps) ** 2 * mpmath.log(N * (1 + mpmath.log(T)))


def mp_smallest(N, w, eps):
    """Smallest integer T >= 2 from which the inequality holds, by bisection."""
    lo, hi = 1, 2
    while not mp_satisfies(hi, N, w, eps):
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if mp_satisfies(mid, N, w, eps):
            hi = mid
        else:
            lo = mid
    return hi


def test_complexity_upper_examples():
    assert complexity_upper(1, 1.0) == 1.0
    assert complexity_upper(10, 0.1) == pytest.approx(1000.0)
    with pytest.raises(ValueError):
        complexity_upper(3, 0.0)


def test_exact_complexity_below_upper(tiny_regression):
    phi = exact_shapley(tiny_regression, LearnerSpec("knn", {"k": 2}), "neg_mae").phi
    for tau, eps in [(0.0, 0.05), (-0.1, 0.1), (0.5, 0.3)]:
        assert complexity(phi, tau, eps) <= complexity_upper(5, eps)


@settings(max_examples=100, deadline=None)
@given(phi=st.lists(st.floats(-10, 10), min_size=1, max_size=30), tau=st.floats(-5, 5),
       eps=st.floats(1e-3, 2.0))
def test_complexity_never_exceeds_upper(phi, tau, eps):
    assert complexity(phi, tau, eps) <= complexity_upper(len(phi), eps) * (1 + 1e-12)


def test_width_examples():
    assert width_bound("accuracy") == 2.0
    assert width_bound("neg_mse", (0.0, 1.0)) == 2.0
    assert width_bound("neg_mae", (1.0, 3.0)) == 4.0
    with pytest.raises(ValueError, match="label range"):
        width_bound("neg_mse")


def test_width_tree_examples():
    assert width_bound_tree(1, (0.0, 1.0)) == 2.0
    assert width_bound_tree(3, (0.0, 1.0)) == 1.0
    vals = [width_bound_tree(m, (0.0, 1.0)) for m in range(1, 200)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        width_bound_tree(0, (0.0, 1.0))


def test_sufficient_matches_high_precision():
    T = sufficient_iterations(10, 2.0, 0.1)
    assert T == mp_smallest(10, 2.0, 0.1)
    assert 1.2e6 < T < 1.35e6
    assert satisfies_sufficient(T, 10, 2.0, 0.1)
    assert not satisfies_sufficient(T - 1, 10, 2.0, 0.1)


@pytest.mark.parametrize("N,w,eps", [(1, 1.0, 1.0), (5, 1.0, 0.25), (100, 2.0, 0.5), (3, 0.1, 1.0)])
def test_sufficient_minimal(N, w, eps):
    T = sufficient_iterations(N, w, eps)
    assert T == mp_smallest(N, w, eps)


@settings(max_examples=40, deadline=None)
@given(N=st.integers(1, 500), w=st.floats(0.01, 10), eps=st.floats(0.01, 2))
def test_sufficient_satisfies_inequality(N, w, eps):
    T = sufficient_iterations(N, w, eps)
    assert satisfies_sufficient(T, N, w, eps)
    assert not satisfies_sufficient(T - 1, N, w, eps)


def test_halving_epsilon_quadruples():
    for eps in [0.4, 0.2, 0.1]:
        assert sufficient_iterations(10, 2.0, eps / 2) >= 4 * sufficient_iterations(10, 2.0, eps)


def test_failure_bound_examples():
    assert failure_bound(1, 1) == 1.0
    expected = 1 / (100 * (1 + mpmath.log(100)) ** 2)
    assert failure_bound(10, 100) == pytest.approx(float(expected), rel=1e-12)
    assert failure_bound(10, 100) == pytest.approx(3.18e-4, rel=1e-2)
    assert failure_bound(11, 100) < failure_bound(10, 100)
    assert failure_bound(10, 101) < failure_bound(10, 100)


def test_report_fields():
    r = theory_report(10, "neg_mse", 0.1, (0.0, 1.0), n_instance=3)
    assert r.w_bound == 1.0 and r.r_equiv == 0.5 and r.tree_factor == 0.5
    assert r.h_upper == pytest.approx(1000.0)
    assert 0 < r.p_fail_bound <= 1
    assert r.log_base == "e"
    with pytest.raises(ValueError):
        theory_report(10, "accuracy", 0.1, n_instance=3)


def observed_spread(ds, learner, metric, min_prefix=0):
    """Max over instances of (max - min) marginal over every permutation."""
    ids = list(ds.train_ids)
    u = Utility(ds, learner, metric, cache=True)
    seen = {i: [] for i in ids}
    for sigma in itertools.permutations(ids):
        for j in range(min_prefix, len(ids)):
            seen[sigma[j]].append(u(sigma[:j + 1]) - u(sigma[:j]))
    return max(max(v) - min(v) for v in seen.values() if v)


@pytest.mark.parametrize("learner,metric", [
    (LearnerSpec("knn", {"k": 2}), "neg_mae"), (LearnerSpec("ridge"), "neg_mse"),
    (LearnerSpec("cart_tree", {"max_depth": 2}), "neg_mse"),
])
def test_observed_spread_within_width(tiny_regression, learner, metric):
    w = width_bound(metric, tiny_regression.label_range)
    assert observed_spread(tiny_regression, learner, metric) <= w


def test_accuracy_spread_within_width(tiny_classification):
    w = width_bound("accuracy")
    assert observed_spread(tiny_classification, LearnerSpec("knn", {"k": 1}), "accuracy") <= w


def test_tree_spread_within_refined_width():
    # identical features: the tree is a single leaf whatever the subset
    rng = np.random.default_rng(0)
    y = rng.uniform(0, 1, 12)
    ds = with_split(np.zeros((12, 1)), y, 6, 5)
    m = 3
    learner = LearnerSpec("cart_tree", {"min_samples_leaf": m})
    spread = observed_spread(ds, learner, "neg_mse", min_prefix=m)
    assert spread <= width_bound_tree(m, ds.label_range)
