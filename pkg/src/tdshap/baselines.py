"""Reference valuation methods: exact Shapley, truncated Monte Carlo, LOO, random."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .learners import LearnerSpec
from .metrics import Metric, Utility

EXACT_MAX = 8


@dataclass
class ValuationVector:
    ids: np.ndarray
    phi: np.ndarray
    method: str
    samples_used: int
    trainings: int = 0

    def as_dict(self) -> dict[int, float]:
        return {int(i): float(v) for i, v in zip(self.ids, self.phi)}


@dataclass(frozen=True)
class BaselineConfig:
    n_loo: int = 1
    n_perm: int = 100
    truncation_tol: float | None = None  # None: 1% of |V(D) - V(empty)|

    def __post_init__(self):
        if self.n_loo < 1:
            raise ValueError(f"n_loo must be >= 1, got {self.n_loo}")
        if self.n_perm < 1:
            raise ValueError(f"n_perm must be >= 1, got {self.n_perm}")
        if self.truncation_tol is not None and self.truncation_tol < 0:
            raise ValueError(f"truncation_tol must be >= 0, got {self.truncation_tol}")


def exact_shapley(
    dataset: Dataset,
    learner: LearnerSpec,
    metric: Metric,
    exact_max: int = EXACT_MAX,
    utility: Utility | None = None,
) -> ValuationVector:
    """Exact data Shapley values via the subset-weighted sum.

    ``phi_n = sum_{S not containing n} |S|! (N-|S|-1)! / N! * (V(S+n) - V(S))``,
    which equals the average over all N! permutations, with V evaluated once
    per subset (2^N trainings).
    """
    ids = dataset.train_ids
    N = len(ids)
    if N > exact_max:
        raise ValueError(f"exact Shapley limited to {exact_max} training instances, got {N}")
    if utility is None:
        utility = Utility(dataset, learner, metric)

    masks = np.arange(1 << N)
    members = (masks[:, None] >> np.arange(N)) & 1
    values = np.array([utility(ids[members[m].astype(bool)]) for m in masks])
    sizes = members.sum(axis=1)
    weight = np.array([math.factorial(s) * math.factorial(N - s - 1) / math.factorial(N)
                       if s < N else 0.0 for s in sizes])

    phi = np.zeros(N)
    for n in range(N):
        without = masks[members[:, n] == 0]
        phi[n] = math.fsum(weight[without] * (values[without | (1 << n)] - values[without]))
    return ValuationVector(ids.copy(), phi, "exact", int(1 << N), utility.fits)


def tmc_shapley(
    dataset: Dataset,
    learner: LearnerSpec,
    metric: Metric,
    config: BaselineConfig = BaselineConfig(),
    seed: int = 0,
    cache: bool = False,
) -> ValuationVector:
    """Truncated Monte Carlo Shapley.

    Each sampled permutation is scanned front to back. Once a non-empty
    prefix scores within ``truncation_tol`` of V(D), the remaining marginals
    of that permutation are recorded as 0 without training.
    """
    rng = np.random.default_rng(seed)
    ids = dataset.train_ids
    N = len(ids)
    utility = Utility(dataset, learner, metric, cache=cache)
    v_full = utility(ids)
    v_empty = utility(ids[:0])
    tol = config.truncation_tol
    if tol is None:
        tol = 0.01 * abs(v_full - v_empty)

    pos = {int(i): k for k, i in enumerate(ids)}
    totals = np.zeros((config.n_perm, N))
    for p in range(config.n_perm):
        sigma = rng.permutation(ids)
        prev = v_empty
        truncated = False
        for j in range(N):
            if j > 0 and not truncated and abs(prev - v_full) < tol:
                truncated = True
            if truncated:
                marginal = 0.0
            else:
                cur = utility(sigma[:j + 1])
                marginal, prev = cur - prev, cur
            totals[p, pos[int(sigma[j])]] = marginal
    # column sums in a fixed order keep the mean independent of scheduling
    phi = np.array([math.fsum(totals[:, n]) for n in range(N)]) / config.n_perm
    return ValuationVector(ids.copy(), phi, "tmc", config.n_perm * N, utility.fits)


def loo_values(utility: Utility, retained: np.ndarray) -> np.ndarray:
    v = utility(retained)
    return np.array([v - utility(np.delete(retained, k)) for k in range(len(retained))])


def loo_grouped(
    dataset: Dataset,
    learner: LearnerSpec,
    metric: Metric,
    n_loo: int,
    utility: Utility | None = None,
    return_scores: bool = False,
):
    """Removal order from grouped leave-one-out.

    Each round scores every retained instance by ``V(R) - V(R - {n})``
    against the current retained set ``R`` and moves the ``n_loo`` lowest
    (ties to the lower id) to the end of the order. With ``return_scores``
    the score each instance had in its removal round is returned as well.
    """
    if not 1 <= n_loo <= len(dataset.train_ids):
        raise ValueError(f"n_loo must lie in [1, {len(dataset.train_ids)}], got {n_loo}")
    if utility is None:
        utility = Utility(dataset, learner, metric)
    retained = np.sort(dataset.train_ids)
    order: list[int] = []
    scores: dict[int, float] = {}
    while retained.size:
        phi = loo_values(utility, retained)
        rank = np.lexsort((retained, phi))
        group = rank[:n_loo]
        for g in group:
            order.append(int(retained[g]))
            scores[int(retained[g])] = float(phi[g])
        retained = np.delete(retained, group)
    return (order, scores) if return_scores else order


def random_order(train_ids, seed: int) -> list[int]:
    return [int(i) for i in np.random.default_rng(seed).permutation(np.asarray(train_ids))]
