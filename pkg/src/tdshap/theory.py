"""Calculators for the guarantees of thresholding data Shapley.

All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .metrics import MetricKind


def complexity(phi, tau: float, epsilon: float) -> float:
    """Problem complexity ``H = sum_n (|phi_n - tau| + epsilon)^-2``."""
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    gaps = np.abs(np.asarray(phi, dtype=float) - tau) + epsilon
    return float(np.sum(gaps ** -2.0))


def complexity_upper(n_instances: int, epsilon: float) -> float:
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    return n_instances / epsilon ** 2


def width_bound(metric, label_range: tuple[float, float] | None = None) -> float:
    """Upper bound on the spread of a marginal contribution under ``metric``.

    Regression bounds assume predictions stay inside ``label_range``.
    """
    metric = MetricKind(metric)
    if metric is MetricKind.ACCURACY:
        return 2.0
    if label_range is None:
        raise ValueError(f"{metric.value} width bound needs a label range")
    span = label_range[1] - label_range[0]
    if span < 0:
        raise ValueError(f"invalid label range {label_range}")
    if metric is MetricKind.NEG_MSE:
        return 2.0 * span ** 2
    return 2.0 * span


def width_bound_tree(n_instance: int, label_range: tuple[float, float]) -> float:
    """Negative-MSE width bound for a tree whose leaves hold >= n_instance points."""
    if n_instance < 1:
        raise ValueError(f"n_instance must be >= 1, got {n_instance}")
    return width_bound(MetricKind.NEG_MSE, label_range) * 2.0 / (n_instance + 1)


def _rhs(T: float, n: int, w: float, epsilon: float) -> float:
    return 64.0 * n * w ** 2 / epsilon ** 2 * math.log(n * (1.0 + math.log(T)))


def satisfies_sufficient(T: int, n_instances: int, w: float, epsilon: float) -> bool:
    return T >= 1 and T >= _rhs(T, n_instances, w, epsilon)


def sufficient_iterations(n_instances: int, w: float, epsilon: float,
                          max_rounds: int = 100) -> int:
    """Smallest integer T with ``T >= 64 N w^2 / eps^2 * log(N (1 + log T))``.

    The search starts from ``64 N w^2 / eps^2``, so for N = 1 the isolated
    trivial solution T = 1 (where the log vanishes) is skipped and the result
    is the point from which every larger T also satisfies the inequality.
    """
    if n_instances < 1 or w <= 0 or epsilon <= 0:
        raise ValueError("n_instances, w and epsilon must be positive")
    T = math.ceil(64.0 * n_instances * w ** 2 / epsilon ** 2)
    for _ in range(max_rounds):
        nxt = max(1, math.ceil(_rhs(T, n_instances, w, epsilon)))
        if nxt == T:
            break
        T = nxt
    else:
        raise RuntimeError(
            f"fixed-point iteration did not settle in {max_rounds} rounds (last T={T})"
        )
    if not satisfies_sufficient(T, n_instances, w, epsilon):
        raise RuntimeError(f"fixed point T={T} does not satisfy the inequality")
    # the iteration climbs from below, but guard against float rounding at the boundary
    while T > 2 and satisfies_sufficient(T - 1, n_instances, w, epsilon):
        T -= 1
    return T


def failure_bound(n_instances: int, T: int) -> float:
    if n_instances < 1 or T < 1:
        raise ValueError("n_instances and T must be >= 1")
    return 1.0 / (n_instances ** 2 * (1.0 + math.log(T)) ** 2)


@dataclass(frozen=True)
class TheoryReport:
    n_instances: int
    epsilon: float
    h_upper: float
    w_bound: float
    r_equiv: float
    t_sufficient: int
    p_fail_bound: float
    tree_factor: float | None = None
    log_base: str = "e"

    def to_dict(self) -> dict:
        return asdict(self)


def theory_report(
    n_instances: int,
    metric,
    epsilon: float,
    label_range: tuple[float, float] | None = None,
    n_instance: int | None = None,
) -> TheoryReport:
    """Bundle the bounds for one configuration.

    With ``n_instance`` (the tree leaf floor) and the negative-MSE metric the
    tree-refined width is used.
    """
    w = width_bound(metric, label_range)
    tree_factor = None
    if n_instance is not None:
        if MetricKind(metric) is not MetricKind.NEG_MSE:
            raise ValueError("the tree width refinement applies to neg_mse only")
        tree_factor = 2.0 / (n_instance + 1)
        w = width_bound_tree(n_instance, label_range)
    if w <= 0:
        raise ValueError("width bound is zero; the label range is degenerate")
    T = sufficient_iterations(n_instances, w, epsilon)
    return TheoryReport(
        n_instances=n_instances,
        epsilon=epsilon,
        h_upper=complexity_upper(n_instances, epsilon),
        w_bound=w,
        r_equiv=w / 2.0,
        t_sufficient=T,
        p_fail_bound=failure_bound(n_instances, T),
        tree_factor=tree_factor,
    )
