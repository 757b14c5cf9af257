"""Performance metric V and single-permutation marginal contributions."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence, Union

import numpy as np

from .dataset import Dataset
from .learners import FittedModel, LearnerSpec, fit


class MetricKind(str, Enum):
    ACCURACY = "accuracy"
    NEG_MAE = "neg_mae"
    NEG_MSE = "neg_mse"


# a callable metric maps (y_true, y_pred) to a higher-better score
Metric = Union[MetricKind, str, Callable[[np.ndarray, np.ndarray], float]]


def as_metric(metric: Metric):
    if callable(metric) and not isinstance(metric, MetricKind):
        return metric
    return MetricKind(metric)


def score(y_true: np.ndarray, y_pred: np.ndarray, metric: Metric) -> float:
    if len(y_true) == 0:
        raise ValueError("cannot evaluate on an empty validation set")
    metric = as_metric(metric)
    if metric is MetricKind.ACCURACY:
        return float(np.mean(y_pred == y_true))
    if metric is MetricKind.NEG_MAE:
        return -float(np.mean(np.abs(y_pred - y_true)))
    if metric is MetricKind.NEG_MSE:
        return -float(np.mean((y_pred - y_true) ** 2))
    return float(metric(y_true, y_pred))


def evaluate(model: FittedModel, X: np.ndarray, y: np.ndarray, metric: Metric) -> float:
    """Value of ``model`` on the instances ``(X, y)``; higher is better."""
    if len(y) == 0:
        raise ValueError("cannot evaluate on an empty validation set")
    return score(np.asarray(y, dtype=float), model.predict(np.asarray(X, dtype=float)), metric)


class Utility:
    """V(D'): train ``learner`` on a subset of training ids, score on validation.

    ``fits`` counts learner trainings. With ``cache=True`` values are memoised
    per subset (valid because the learners are deterministic), and cache hits
    do not count as trainings.
    """

    def __init__(self, dataset: Dataset, learner: LearnerSpec, metric: Metric,
                 cache: bool = False, warm_from: FittedModel | None = None):
        self.dataset = dataset
        self.learner = learner
        self.metric = as_metric(metric)
        self.warm_from = warm_from
        self.fits = 0
        self._cache: dict[frozenset, float] | None = {} if cache else None
        self._X_val = dataset.X[dataset.val_ids]
        self._y_val = dataset.y[dataset.val_ids]

    def __call__(self, subset_ids: Sequence[int]) -> float:
        key = None
        if self._cache is not None:
            key = frozenset(int(i) for i in subset_ids)
            if key in self._cache:
                return self._cache[key]
        model = fit(self.learner, self.dataset, np.asarray(subset_ids, dtype=np.int64),
                    warm_from=self.warm_from)
        self.fits += 1
        value = evaluate(model, self._X_val, self._y_val, self.metric)
        if key is not None:
            self._cache[key] = value
        return value


def permutation_digest(sigma: Sequence[int]) -> str:
    data = np.asarray(sigma, dtype="<i8").tobytes()
    return hashlib.sha256(data).hexdigest()[:16]


@dataclass(frozen=True)
class MarginalSample:
    instance_id: int
    permutation_digest: str
    phi: float
    trainings_used: int


def prefix_before(sigma: Sequence[int], n: int) -> np.ndarray:
    """Instances placed before ``n`` in the permutation ``sigma``."""
    sigma = np.asarray(sigma, dtype=np.int64)
    pos = np.nonzero(sigma == n)[0]
    if pos.size == 0:
        raise ValueError(f"instance {n} does not appear in the permutation")
    return sigma[:pos[0]]


def marginal_contribution(
    n: int,
    sigma: Sequence[int],
    learner: LearnerSpec,
    dataset: Dataset,
    metric: Metric,
    utility: Utility | None = None,
) -> MarginalSample:
    prefix = prefix_before(sigma, n)
    if utility is None:
        utility = Utility(dataset, learner, metric)
    before = utility.fits
    phi = utility(np.append(prefix, n)) - utility(prefix)
    return MarginalSample(int(n), permutation_digest(sigma), phi, utility.fits - before)
