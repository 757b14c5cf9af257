"""Labeled tabular datasets, random splits and label-noise fixtures.

Instances are stored column-wise (``X`` is ``n x d``, ``y`` has length ``n``)
and identified by their row index, which never changes after loading.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

TASKS = ("regression", "classification")


class Instance(NamedTuple):
    id: int
    features: np.ndarray
    label: float


@dataclass(frozen=True)
class Split:
    train_ids: np.ndarray
    val_ids: np.ndarray
    test_ids: np.ndarray

    def __post_init__(self):
        for name in ("train_ids", "val_ids", "test_ids"):
            ids = np.asarray(getattr(self, name), dtype=np.int64)
            object.__setattr__(self, name, ids)
            if ids.size == 0:
                raise ValueError(f"split {name} is empty")
        a, b, c = (set(x.tolist()) for x in (self.train_ids, self.val_ids, self.test_ids))
        if a & b or a & c or b & c:
            raise ValueError("split index sets overlap")


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    task: str = "regression"
    n_classes: int | None = None
    split: Split | None = None
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.task == "classification":
            if np.any(y != np.round(y)) or np.any(y < 0):
                raise ValueError("classification labels must be non-negative integers")
            n_classes = self.n_classes
            if n_classes is None:
                n_classes = int(y.max()) + 1 if y.size else 0
            elif y.size and y.max() >= n_classes:
                raise ValueError(f"label {int(y.max())} outside [0, {n_classes})")
            object.__setattr__(self, "n_classes", n_classes)
        if self.split is not None:
            for ids in (self.split.train_ids, self.split.val_ids, self.split.test_ids):
                if ids.min() < 0 or ids.max() >= len(y):
                    raise ValueError("split ids outside dataset")

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def instance(self, i: int) -> Instance:
        return Instance(int(i), self.X[i], float(self.y[i]))

    def _require_split(self) -> Split:
        if self.split is None:
            raise ValueError("dataset has no split assigned")
        return self.split

    @property
    def train_ids(self) -> np.ndarray:
        return self._require_split().train_ids

    @property
    def val_ids(self) -> np.ndarray:
        return self._require_split().val_ids

    @property
    def test_ids(self) -> np.ndarray:
        return self._require_split().test_ids

    @property
    def label_range(self) -> tuple[float, float]:
        # test labels never enter the bound computation
        if self.split is None:
            labels = self.y
        else:
            labels = self.y[np.concatenate([self.split.train_ids, self.split.val_ids])]
        if labels.size == 0:
            raise ValueError("no labels to compute a range from")
        return float(labels.min()), float(labels.max())

    def with_split(self, split: Split) -> "Dataset":
        return replace(self, split=split)

    def with_labels(self, y: np.ndarray) -> "Dataset":
        return replace(self, y=np.asarray(y, dtype=float))


def load_csv(
    path: str | Path,
    label: str,
    task: str = "regression",
    features: Sequence[str] | None = None,
    n_classes: int | None = None,
) -> Dataset:
    """Read a headered, comma-separated file into a :class:`Dataset`.

    Every column other than ``label`` is a feature unless ``features`` names
    a subset. Errors name the offending (1-based, header excluded) row and
    column.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: no instances")
        header = [h.strip() for h in header]
        if label not in header:
            raise ValueError(f"{path}: label column {label!r} not in header {header}")
        if features is None:
            features = [h for h in header if h != label]
        missing = [f for f in features if f not in header]
        if missing:
            raise ValueError(f"{path}: unknown feature columns {missing}")
        cols = [header.index(f) for f in features]
        label_col = header.index(label)

        rows, labels = [], []
        for r, rec in enumerate(reader, start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ValueError(f"{path}: row {r} has {len(rec)} fields, expected {len(header)}")
            feats = []
            for c, name in zip(cols, features):
                try:
                    feats.append(float(rec[c]))
                except ValueError:
                    raise ValueError(
                        f"{path}: non-numeric value {rec[c]!r} at row {r}, column {name!r}"
                    ) from None
            raw = rec[label_col].strip()
            try:
                value = float(raw)
            except ValueError:
                if task == "classification":
                    raise ValueError(f"{path}: unknown label class {raw!r} at row {r}") from None
                raise ValueError(
                    f"{path}: non-numeric value {raw!r} at row {r}, column {label!r}"
                ) from None
            if task == "classification" and (value != int(value) or value < 0
                                             or (n_classes is not None and value >= n_classes)):
                raise ValueError(f"{path}: unknown label class {raw!r} at row {r}")
            rows.append(feats)
            labels.append(value)

    if not rows:
        raise ValueError(f"{path}: no instances")
    return Dataset(
        X=np.asarray(rows, dtype=float).reshape(len(rows), len(cols)),
        y=np.asarray(labels),
        task=task,
        n_classes=n_classes,
        feature_names=tuple(features),
    )


def split(dataset: Dataset, sizes: Sequence[int], seed: int) -> Split:
    n_train, n_val, n_test = (int(s) for s in sizes)
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"split sizes must be positive, got {tuple(sizes)}")
    if n_train + n_val + n_test > len(dataset):
        raise ValueError(
            f"split sizes {tuple(sizes)} exceed dataset size {len(dataset)}"
        )
    perm = np.random.default_rng(seed).permutation(len(dataset))
    return Split(
        train_ids=np.sort(perm[:n_train]),
        val_ids=np.sort(perm[n_train:n_train + n_val]),
        test_ids=np.sort(perm[n_train + n_val:n_train + n_val + n_test]),
    )


def inject_label_noise(
    dataset: Dataset,
    fraction: float,
    mode: str = "flip_class",
    seed: int = 0,
    offset: float | None = None,
) -> tuple[Dataset, np.ndarray]:
    """Corrupt ``floor(fraction * |train|)`` training labels.

    ``mode="flip_class"`` replaces each chosen label with a different class,
    drawn uniformly; ``mode="add_offset"`` adds ``offset`` (regression only).
    Returns the corrupted dataset and the sorted corrupted ids.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    if mode not in ("flip_class", "add_offset"):
        raise ValueError(f"unknown noise mode {mode!r}")
    if mode == "add_offset":
        if dataset.task == "classification":
            raise ValueError("add_offset noise is undefined for classification")
        if offset is None:
            raise ValueError("add_offset noise needs an offset")
    elif dataset.task != "classification":
        raise ValueError("flip_class noise needs a classification task")

    train = dataset.train_ids
    count = math.floor(fraction * len(train))
    if fraction > 0 and count < 1:
        raise ValueError(f"fraction {fraction} corrupts no instance of {len(train)}")
    if count == 0:
        return dataset, np.empty(0, dtype=np.int64)

    rng = np.random.default_rng(seed)
    ids = np.sort(rng.choice(train, size=count, replace=False))
    y = dataset.y.copy()
    if mode == "add_offset":
        y[ids] += offset
    else:
        if dataset.n_classes < 2:
            raise ValueError("flip_class needs at least two classes")
        shift = rng.integers(1, dataset.n_classes, size=count)
        y[ids] = (y[ids] + shift) % dataset.n_classes
    return dataset.with_labels(y), ids


def make_regression(
    n: int,
    n_features: int = 2,
    noise: float = 1.0,
    seed: int = 0,
) -> Dataset:
    """Synthetic piecewise-smooth regression data for fixtures and demos."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, 1.0, size=(n, n_features))
    signal = 10.0 + 4.0 * np.sin(2.0 * np.pi * X[:, 0]) + 3.0 * (X[:, 1:] > 0.5).sum(axis=1)
    y = signal + rng.normal(0.0, noise, size=n)
    return Dataset(X=X, y=y, task="regression",
                   feature_names=tuple(f"x{i}" for i in range(n_features)))


def make_classification(
    n: int,
    n_features: int = 2,
    n_classes: int = 2,
    seed: int = 0,
) -> Dataset:
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-2.0, 2.0, size=(n_classes, n_features))
    y = rng.integers(0, n_classes, size=n)
    X = centers[y] + rng.normal(0.0, 1.0, size=(n, n_features))
    return Dataset(X=X, y=y.astype(float), task="classification", n_classes=n_classes,
                   feature_names=tuple(f"x{i}" for i in range(n_features)))
