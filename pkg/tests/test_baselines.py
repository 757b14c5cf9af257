import itertools
import math

import numpy as np
import pytest

from tdshap.baselines import (BaselineConfig, exact_shapley, loo_grouped, random_order,
                              tmc_shapley)
from tdshap.learners import LearnerSpec
from tdshap.metrics import Utility, score
from tdshap.theory import width_bound

from conftest import with_split

KNN2 = LearnerSpec("knn", {"k": 2})


def brute_force(ds, learner, metric):
    """Average marginal over all N! orderings, one training per prefix."""
    ids = list(ds.train_ids)
    u = Utility(ds, learner, metric, cache=True)
    total = {i: [] for i in ids}
    for sigma in itertools.permutations(ids):
        for j, n in enumerate(sigma):
            total[n].append(u(sigma[:j + 1]) - u(sigma[:j]))
    return np.array([math.fsum(total[i]) / len(total[i]) for i in ids])


@pytest.mark.parametrize("learner,metric", [
    (KNN2, "neg_mae"), (LearnerSpec("ridge"), "neg_mse"),
    (LearnerSpec("cart_tree", {"max_depth": 2}), "neg_mae"),
])
def test_exact_matches_permutation_average(tiny_regression, learner, metric):
    vec = exact_shapley(tiny_regression, learner, metric)
    np.testing.assert_allclose(vec.phi, brute_force(tiny_regression, learner, metric), atol=1e-10)
    assert vec.samples_used == 32


def test_exact_classification_matches_permutation_average(tiny_classification):
    learner = LearnerSpec("knn", {"k": 1})
    vec = exact_shapley(tiny_classification, learner, "accuracy")
    np.testing.assert_allclose(vec.phi, brute_force(tiny_classification, learner, "accuracy"),
                               atol=1e-10)


def test_exact_efficiency(tiny_regression):
    vec = exact_shapley(tiny_regression, KNN2, "neg_mae")
    u = Utility(tiny_regression, KNN2, "neg_mae")
    assert math.fsum(vec.phi) == pytest.approx(u(tiny_regression.train_ids) - u([]), abs=1e-9)


def test_exact_single_instance():
    ds = with_split([[0.0], [1.0], [2.0], [3.0]], [1.0, 2.0, 0.0, 0.0], 1, 2)
    vec = exact_shapley(ds, LearnerSpec("ridge"), "neg_mse")
    u = Utility(ds, LearnerSpec("ridge"), "neg_mse")
    assert vec.phi[0] == pytest.approx(u([0]) - u([]))


def test_exact_symmetry_identical_instances():
    X = [[0.0], [1.0], [1.0], [3.0], [0.5], [2.0], [2.5], [9.0]]
    y = [0.0, 2.0, 2.0, 3.0, 1.0, 2.5, 2.8, 0.0]
    ds = with_split(X, y, 4, 3)
    vec = exact_shapley(ds, KNN2, "neg_mse")
    assert abs(vec.phi[1] - vec.phi[2]) <= 1e-12


def test_exact_size_guard():
    ds = with_split(np.arange(12.0)[:, None], np.arange(12.0), 9, 2)
    with pytest.raises(ValueError, match="limited"):
        exact_shapley(ds, KNN2, "neg_mae")


def test_exact_scales_with_metric(tiny_regression):
    base = exact_shapley(tiny_regression, KNN2, "neg_mae")
    scaled = exact_shapley(tiny_regression, KNN2,
                           lambda t, p: 3.0 * score(t, p, "neg_mae"))
    np.testing.assert_allclose(scaled.phi, 3.0 * base.phi, atol=1e-12)


def test_tmc_infinite_tolerance_keeps_first_position(tiny_regression):
    vec = tmc_shapley(tiny_regression, KNN2, "neg_mae",
                      BaselineConfig(n_perm=1, truncation_tol=math.inf), seed=4)
    first = int(np.random.default_rng(4).permutation(tiny_regression.train_ids)[0])
    u = Utility(tiny_regression, KNN2, "neg_mae")
    expected = np.zeros(5)
    expected[first] = u([first]) - u([])
    np.testing.assert_allclose(vec.phi, expected)
    assert vec.samples_used == 5


def test_tmc_single_permutation_telescopes(tiny_regression):
    vec = tmc_shapley(tiny_regression, KNN2, "neg_mae",
                      BaselineConfig(n_perm=1, truncation_tol=0.0), seed=0)
    u = Utility(tiny_regression, KNN2, "neg_mae")
    assert math.fsum(vec.phi) == pytest.approx(u(tiny_regression.train_ids) - u([]))


def test_tmc_converges_to_exact(tiny_regression):
    exact = exact_shapley(tiny_regression, KNN2, "neg_mae").phi
    w = width_bound("neg_mae", tiny_regression.label_range)
    ok = 0
    for seed in range(10):
        vec = tmc_shapley(tiny_regression, KNN2, "neg_mae",
                          BaselineConfig(n_perm=5000, truncation_tol=0.0), seed=seed, cache=True)
        ok += np.max(np.abs(vec.phi - exact)) <= 0.05 * w
    assert ok >= 9


def hand_loo_dataset():
    # train labels 0, 1, 2, 30 (the last corrupted); val follows y = x
    X = [[0.0], [1.0], [2.0], [3.0], [0.1], [1.1], [2.1], [3.1], [5.0]]
    y = [0.0, 1.0, 2.0, 30.0, 0.0, 1.0, 2.0, 3.0, 5.0]
    return with_split(X, y, 4, 4)


def test_loo_hand_computed():
    # 1-NN errors on val: full set 0,0,0,27 -> V = -6.75
    # drop 0: 1,0,0,27 -> -7.0;  drop 1: 0,1,0,27 -> -7.0
    # drop 2: 0,0,28,27 -> -13.75;  drop 3: 0,0,0,1 -> -0.25
    ds = hand_loo_dataset()
    order, scores = loo_grouped(ds, LearnerSpec("knn", {"k": 1}), "neg_mae", 4,
                                return_scores=True)
    assert scores == pytest.approx({0: 0.25, 1: 0.25, 2: 7.0, 3: -6.5})
    assert order == [3, 0, 1, 2]


def test_loo_corrupted_in_first_group():
    order = loo_grouped(hand_loo_dataset(), LearnerSpec("knn", {"k": 1}), "neg_mae", 2)
    assert 3 in order[:2]
    assert sorted(order) == [0, 1, 2, 3]


def test_loo_zero_when_removal_irrelevant(tiny_regression):
    _, scores = loo_grouped(tiny_regression, LearnerSpec("constant"), "neg_mae", 5,
                            return_scores=True)
    assert all(v == 0.0 for v in scores.values())


def test_loo_rejects_bad_group():
    with pytest.raises(ValueError):
        loo_grouped(hand_loo_dataset(), LearnerSpec("knn"), "neg_mae", 0)


def test_random_order_reproducible():
    ids = np.arange(20)
    assert random_order(ids, 3) == random_order(ids, 3)
    assert sorted(random_order(ids, 3)) == list(range(20))


@pytest.mark.parametrize("kw", [{"n_loo": 0}, {"n_perm": 0}, {"truncation_tol": -1.0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        BaselineConfig(**kw)
