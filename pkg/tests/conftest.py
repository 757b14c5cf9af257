import numpy as np
import pytest

from tdshap.dataset import Dataset, Split

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def with_split(X, y, n_train, n_val, task="regression", n_classes=None):
    """Dataset whose first n_train rows train, next n_val validate, rest test."""
    n = len(y)
    split = Split(np.arange(n_train), np.arange(n_train, n_train + n_val),
                  np.arange(n_train + n_val, n))
    return Dataset(np.asarray(X, float), np.asarray(y, float), task=task,
                   n_classes=n_classes, split=split)


@pytest.fixture
def tiny_regression():
    # five 1-D training points, one with an outlying label
    X = [0, 1, 2, 3, 4, 0.5, 1.5, 2.5, 3.5, 4.5, 1, 3, 2.2]
    y = [1, 2, 9, 4, 5, 1.5, 2.5, 3.5, 4.5, 5.5, 2, 4, 3.0]
    return with_split(X, y, 5, 7)


@pytest.fixture
def tiny_classification():
    rng = np.random.default_rng(3)
    X = np.r_[rng.normal(-1, 0.7, (6, 2)), rng.normal(1, 0.7, (6, 2))]
    y = np.r_[np.zeros(6), np.ones(6)]
    order = rng.permutation(12)
    X, y = X[order], y[order]
    y[0] = 1 - y[0]  # one flipped training label
    return with_split(X, y, 6, 5, task="classification", n_classes=2)
