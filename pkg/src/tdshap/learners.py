"""Small deterministic learners with a uniform fit/predict contract.

Every learner is fit on a subset of a dataset's training ids. An empty
subset yields :class:`ConstantModel` (train-split mean for regression,
class 0 for classification) so the value of the empty coalition is defined.

New learners plug in through :func:`register_learner`; a learner that can
start from a model trained on the whole training set registers with
``supports_warm_start=True``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .dataset import Dataset


class FittedModel:
    """Base class for fitted models. ``predict`` takes a 2-D feature array."""

    n_features: int
    training_subset_size: int
    task: str

    def predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class ConstantModel(FittedModel):
    value: float
    n_features: int
    task: str = "regression"
    training_subset_size: int = 0

    def predict(self, X):
        return np.full(len(X), self.value, dtype=float)


@dataclass(frozen=True, eq=False)
class RidgeModel(FittedModel):
    coef: np.ndarray  # (d,) for regression, (d, C) for classification
    intercept: Any
    task: str = "regression"
    training_subset_size: int = 0

    @property
    def n_features(self):
        return self.coef.shape[0]

    def predict(self, X):
        scores = X @ self.coef + self.intercept
        if self.task == "classification":
            return np.argmax(scores, axis=1).astype(float)
        return scores


@dataclass(frozen=True, eq=False)
class TreeModel(FittedModel):
    """Binary tree in array form; ``x[feature] <= threshold`` goes left.

    ``leaf_ids[node]`` and ``leaf_labels[node]`` hold the dataset ids and
    labels of the training instances that reached a leaf (empty for internal
    nodes).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    leaf_ids: tuple
    leaf_labels: tuple
    n_features: int
    task: str = "regression"
    label_range: tuple[float, float] | None = None
    training_subset_size: int = 0

    def apply(self, X):
        node = np.zeros(len(X), dtype=np.int64)
        active = self.left[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.left[node] >= 0
        return node

    def predict(self, X):
        return self.value[self.apply(X)]

    @property
    def leaves(self) -> np.ndarray:
        return np.nonzero(self.left < 0)[0]


@dataclass(frozen=True, eq=False)
class KnnModel(FittedModel):
    X: np.ndarray
    y: np.ndarray
    k: int
    task: str = "regression"
    n_classes: int | None = None
    training_subset_size: int = 0

    @property
    def n_features(self):
        return self.X.shape[1]

    def predict(self, X):
        k = min(self.k, len(self.y))
        d2 = ((X[:, None, :] - self.X[None, :, :]) ** 2).sum(axis=2)
        # stable sort: equidistant neighbours resolve to the earlier training row
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
        labels = self.y[nearest]
        if self.task == "classification":
            votes = (labels[:, :, None] == np.arange(self.n_classes)).sum(axis=1)
            return np.argmax(votes, axis=1).astype(float)
        return labels.mean(axis=1)


# -- registry -----------------------------------------------------------------

FitFn = Callable[[Dataset, np.ndarray, dict, "FittedModel | None"], FittedModel]


@dataclass(frozen=True)
class _Entry:
    fit: FitFn
    defaults: dict
    supports_warm_start: bool
    validate: Callable[[dict], None] | None = None


_LEARNERS: dict[str, _Entry] = {}


def register_learner(kind, fit_fn, defaults=None, supports_warm_start=False, validate=None):
    _LEARNERS[kind] = _Entry(fit_fn, dict(defaults or {}), supports_warm_start, validate)


def available_learners() -> list[str]:
    return sorted(_LEARNERS)


@dataclass(frozen=True)
class LearnerSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _LEARNERS:
            raise ValueError(f"unknown learner {self.kind!r}; known: {available_learners()}")
        entry = _LEARNERS[self.kind]
        unknown = set(self.params) - set(entry.defaults)
        if unknown:
            raise ValueError(f"unknown {self.kind} hyperparameters {sorted(unknown)}")
        merged = {**entry.defaults, **self.params}
        if entry.validate is not None:
            entry.validate(merged)
        object.__setattr__(self, "params", merged)

    @property
    def supports_warm_start(self) -> bool:
        return _LEARNERS[self.kind].supports_warm_start


def constant_model(dataset: Dataset) -> ConstantModel:
    if dataset.task == "classification":
        value = 0.0
    else:
        value = float(dataset.y[dataset.train_ids].mean())
    return ConstantModel(value=value, n_features=dataset.n_features, task=dataset.task)


def fit(
    spec: LearnerSpec,
    dataset: Dataset,
    subset_ids,
    warm_from: FittedModel | None = None,
) -> FittedModel:
    if warm_from is not None and not spec.supports_warm_start:
        raise ValueError(f"learner {spec.kind!r} does not support warm start")
    # sorted so the model depends on the subset only, not on its listing order
    ids = np.sort(np.asarray(subset_ids, dtype=np.int64))
    if ids.size and not np.isin(ids, dataset.train_ids).all():
        raise ValueError("subset contains ids outside the training split")
    if ids.size == 0:
        return constant_model(dataset)
    return _LEARNERS[spec.kind].fit(dataset, ids, spec.params, warm_from)


def predict(model: FittedModel, features) -> Any:
    """Predict for one feature vector (returns a scalar) or a 2-D batch."""
    X = np.asarray(features, dtype=float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
    out = model.predict(X)
    return float(out[0]) if single else out


# -- built-in learners ----------------------------------------------------------

def _fit_constant(dataset, ids, params, warm_from):
    return constant_model(dataset)


def _fit_ridge(dataset, ids, params, warm_from):
    X, y = dataset.X[ids], dataset.y[ids]
    lam = params["lam"]
    if dataset.task == "classification":
        target = -np.ones((len(y), dataset.n_classes))
        target[np.arange(len(y)), y.astype(int)] = 1.0
    else:
        target = y
    if params["fit_intercept"]:
        x_mean, t_mean = X.mean(axis=0), target.mean(axis=0)
    else:
        x_mean, t_mean = np.zeros(X.shape[1]), np.zeros_like(target[0])
    Xc, tc = X - x_mean, target - t_mean
    coef = np.linalg.solve(Xc.T @ Xc + lam * np.eye(X.shape[1]), Xc.T @ tc)
    intercept = t_mean - x_mean @ coef
    return RidgeModel(coef=coef, intercept=intercept, task=dataset.task,
                      training_subset_size=len(ids))


def _validate_ridge(p):
    if not p["lam"] > 0:
        raise ValueError(f"ridge lam must be > 0, got {p['lam']}")


def _fit_knn(dataset, ids, params, warm_from):
    return KnnModel(X=dataset.X[ids], y=dataset.y[ids], k=int(params["k"]), task=dataset.task,
                    n_classes=dataset.n_classes, training_subset_size=len(ids))


def _validate_knn(p):
    if int(p["k"]) < 1:
        raise ValueError(f"knn k must be >= 1, got {p['k']}")


def _validate_tree(p):
    if int(p["max_depth"]) < 1:
        raise ValueError(f"max_depth must be >= 1, got {p['max_depth']}")
    if int(p["min_samples_leaf"]) < 1:
        raise ValueError(f"min_samples_leaf must be >= 1, got {p['min_samples_leaf']}")


def _best_split(X, y, min_leaf, n_classes):
    """Return (gain, feature, threshold) of the best split or None.

    Features are scanned in index order and thresholds in ascending order;
    only a strictly larger gain replaces the incumbent.
    """
    n = len(y)
    if n < 2 * min_leaf:
        return None
    if n_classes is None:
        parent = float(((y - y.mean()) ** 2).sum())
    else:
        counts = np.bincount(y.astype(int), minlength=n_classes)
        parent = n - float((counts ** 2).sum()) / n
    if parent <= 1e-12 * max(1.0, n):
        return None

    nl = np.arange(min_leaf, n - min_leaf + 1)  # left sizes allowed by the leaf floor
    nr = n - nl
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs, ys = X[order, f], y[order]
        valid = xs[nl - 1] < xs[nl]
        if not valid.any():
            continue
        if n_classes is None:
            cs = np.cumsum(ys)
            cq = np.cumsum(ys ** 2)
            left = cq[nl - 1] - cs[nl - 1] ** 2 / nl
            right = (cq[-1] - cq[nl - 1]) - (cs[-1] - cs[nl - 1]) ** 2 / nr
        else:
            onehot = np.zeros((n, n_classes))
            onehot[np.arange(n), ys.astype(int)] = 1.0
            cc = np.cumsum(onehot, axis=0)
            lc = cc[nl - 1]
            rc = cc[-1] - lc
            left = nl - (lc ** 2).sum(axis=1) / nl
            right = nr - (rc ** 2).sum(axis=1) / nr
        gain = parent - np.maximum(left, 0.0) - np.maximum(right, 0.0)
        gain = np.where(valid, gain, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > 1e-12 * max(1.0, parent) and (best is None or gain[i] > best[0]):
            best = (float(gain[i]), f, 0.5 * (xs[nl[i] - 1] + xs[nl[i]]))
    return best


def _fit_tree(dataset, ids, params, warm_from):
    max_depth = int(params["max_depth"])
    min_leaf = int(params["min_samples_leaf"])
    n_classes = dataset.n_classes if dataset.task == "classification" else None
    X, y = dataset.X[ids], dataset.y[ids]

    feature, threshold, left, right, value, n_samples = [], [], [], [], [], []
    leaf_ids, leaf_labels = [], []

    def leaf_value(labels):
        if n_classes is None:
            return float(labels.mean())
        return float(np.argmax(np.bincount(labels.astype(int), minlength=n_classes)))

    def grow(rows, depth):
        node = len(feature)
        for lst in (feature, left, right):
            lst.append(-1)
        threshold.append(0.0)
        value.append(leaf_value(y[rows]))
        n_samples.append(len(rows))
        leaf_ids.append(())
        leaf_labels.append(())
        best = _best_split(X[rows], y[rows], min_leaf, n_classes) if depth < max_depth else None
        if best is None:
            leaf_ids[node] = tuple(int(i) for i in ids[rows])
            leaf_labels[node] = tuple(float(v) for v in y[rows])
            return node
        _, f, thr = best
        mask = X[rows, f] <= thr
        feature[node], threshold[node] = f, thr
        left[node] = grow(rows[mask], depth + 1)
        right[node] = grow(rows[~mask], depth + 1)
        return node

    grow(np.arange(len(ids)), 0)
    return TreeModel(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=float),
        n_samples=np.asarray(n_samples, dtype=np.int64),
        leaf_ids=tuple(leaf_ids),
        leaf_labels=tuple(leaf_labels),
        n_features=dataset.n_features,
        task=dataset.task,
        label_range=dataset.label_range,
        training_subset_size=len(ids),
    )


register_learner("constant", _fit_constant)
register_learner("ridge", _fit_ridge, {"lam": 1.0, "fit_intercept": True}, validate=_validate_ridge)
register_learner("cart_tree", _fit_tree, {"max_depth": 5, "min_samples_leaf": 1},
                 validate=_validate_tree)
register_learner("knn", _fit_knn, {"k": 5}, validate=_validate_knn)


def leaf_mean_shift_bound_check(
    tree: FittedModel,
    features,
    label: float,
    label_range: tuple[float, float] | None = None,
) -> bool:
    """Check the leaf-mean shift lemma for adding one instance to a leaf.

    With ``k`` training labels in the leaf that ``features`` routes to,
    adding ``label`` moves the leaf mean by at most
    ``(y_max - y_min) / (k + 1)``. ``label_range`` defaults to the range of
    the dataset the tree was fit on.
    """
    if not isinstance(tree, TreeModel):
        raise TypeError(f"expected a cart_tree model, got {type(tree).__name__}")
    if label_range is None:
        label_range = tree.label_range
    leaf = int(tree.apply(np.asarray(features, dtype=float).reshape(1, -1))[0])
    labels = np.asarray(tree.leaf_labels[leaf], dtype=float)
    k = len(labels)
    if k < 1:
        raise ValueError("leaf holds no training instances")
    y_a = labels.mean()
    y_b = (labels.sum() + label) / (k + 1)
    lo, hi = label_range
    bound = (hi - lo) / (k + 1)
    # slack for rounding in the two means
    slack = 1e-12 * max(1.0, abs(lo), abs(hi), abs(label))
    return bool(abs(y_a - y_b) <= bound + slack)
