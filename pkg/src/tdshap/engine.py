"""Thresholding data Shapley: an APT bandit over marginal-contribution samples.

Every training instance is an arm whose reward is the marginal contribution
of the instance to a random permutation prefix. The loop keeps a running mean
per arm, repeatedly samples the arms with the smallest APT index, and finally
reports the instances whose mean is at or below the threshold.

Two cost reductions are built in. ``n_min`` keeps the prefix before the
sampled arms at least that long. ``batch_k`` evaluates K arms placed
consecutively in one permutation with K + 1 trainings.
"""

from __future__ import annotations

import json
import logging
import time
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .learners import FittedModel, LearnerSpec, fit
from .metrics import MarginalSample, Metric, MetricKind, Utility, permutation_digest
from .theory import sufficient_iterations, width_bound

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StopRule:
    kind: str = "iterations"
    n_iter: int = 50
    seconds: float | None = None
    delta: float | None = None
    window: int = 10
    max_iterations: int | None = None  # hard cap for the wall_clock and max_delta modes

    def __post_init__(self):
        if self.kind not in ("iterations", "wall_clock", "max_delta"):
            raise ValueError(f"unknown stop rule {self.kind!r}")
        if self.kind == "iterations" and self.n_iter < 0:
            raise ValueError("n_iter must be >= 0")
        if self.kind == "wall_clock" and (self.seconds is None or self.seconds < 0):
            raise ValueError("wall_clock stop needs seconds >= 0")
        if self.kind == "max_delta" and (self.delta is None or self.delta <= 0 or self.window < 1):
            raise ValueError("max_delta stop needs delta > 0 and window >= 1")

    @classmethod
    def iterations(cls, n_iter: int) -> "StopRule":
        return cls("iterations", n_iter=n_iter)

    @classmethod
    def wall_clock(cls, seconds: float, max_iterations: int | None = None) -> "StopRule":
        return cls("wall_clock", seconds=seconds, max_iterations=max_iterations)

    @classmethod
    def max_delta(cls, delta: float, window: int = 10,
                  max_iterations: int | None = None) -> "StopRule":
        return cls("max_delta", delta=delta, window=window, max_iterations=max_iterations)


@dataclass(frozen=True)
class TdshapConfig:
    epsilon: float = 0.1
    tau: float | None = None  # None: -epsilon
    n_min: int = 0
    batch_k: int = 1
    stop: StopRule = field(default_factory=StopRule)
    seed: int = 0
    warm_start: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.tau is None:
            object.__setattr__(self, "tau", -self.epsilon)
        if self.n_min < 0:
            raise ValueError(f"n_min must be >= 0, got {self.n_min}")
        if self.batch_k < 1:
            raise ValueError(f"batch_k must be >= 1, got {self.batch_k}")

    def validate_for(self, n_train: int) -> None:
        limit = n_train - max(self.n_min, 1)
        if self.batch_k > limit:
            raise ValueError(
                f"batch_k={self.batch_k} exceeds |train| - max(n_min, 1) = {limit}"
            )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BanditState:
    ids: np.ndarray
    phi_hat: np.ndarray
    pulls: np.ndarray
    iteration: int = 0
    trainings_total: int = 0

    @classmethod
    def empty(cls, ids) -> "BanditState":
        ids = np.asarray(ids, dtype=np.int64)
        return cls(ids, np.zeros(len(ids)), np.zeros(len(ids), dtype=np.int64))

    def position(self, n: int) -> int:
        pos = np.nonzero(self.ids == n)[0]
        if pos.size == 0:
            raise KeyError(f"unknown instance {n}")
        return int(pos[0])

    def update(self, pos: int, phi: float) -> float:
        """Moving-average update; returns the change in the estimate."""
        t = self.pulls[pos]
        old = self.phi_hat[pos]
        self.phi_hat[pos] = t / (t + 1) * old + phi / (t + 1)
        self.pulls[pos] = t + 1
        return float(self.phi_hat[pos] - old)


@dataclass
class ValuationResult:
    ids: np.ndarray
    phi_hat: np.ndarray
    pulls: np.ndarray
    tau: float
    harmful: list[int]
    audit_log: list[dict]
    trainings_total: int
    init_trainings: int
    iterations: int
    config: TdshapConfig

    def as_dict(self) -> dict[int, float]:
        return {int(i): float(v) for i, v in zip(self.ids, self.phi_hat)}

    def to_json(self) -> dict:
        return {
            "phi_hat": {str(k): v for k, v in self.as_dict().items()},
            "harmful": list(self.harmful),
            "pulls": {str(int(i)): int(t) for i, t in zip(self.ids, self.pulls)},
            "trainings_total": self.trainings_total,
            "iterations": self.iterations,
            "config": self.config.to_dict(),
            "seed": self.config.seed,
        }


def apt_index(state: BanditState, n: int, tau: float, epsilon: float) -> float:
    pos = state.position(n)
    if state.pulls[pos] < 1:
        raise ValueError(f"instance {n} has not been sampled yet")
    return float(np.sqrt(state.pulls[pos]) * (abs(state.phi_hat[pos] - tau) + epsilon))


def apt_indices(means, pulls, tau: float, epsilon: float) -> np.ndarray:
    return np.sqrt(pulls) * (np.abs(np.asarray(means) - tau) + epsilon)


def smallest_k(values: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Positions of the k smallest values; ties broken uniformly at random.

    Shared by the engine and the bandit simulator.
    """
    if k > len(values):
        raise ValueError(f"cannot select {k} of {len(values)} arms")
    order = np.lexsort((rng.random(len(values)), values))
    return order[:k]


def argmin_random_ties(values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Row-wise argmin of a 2-D array with uniform random tie-breaking.

    Batched form of ``smallest_k(row, 1, rng)`` for the bandit simulator.
    """
    is_min = values == values.min(axis=1, keepdims=True)
    key = np.where(is_min, rng.random(values.shape), -1.0)
    return np.argmax(key, axis=1)


def select_arms(state: BanditState, config: TdshapConfig, rng: np.random.Generator) -> list[int]:
    b = apt_indices(state.phi_hat, state.pulls, config.tau, config.epsilon)
    return [int(state.ids[p]) for p in smallest_k(b, config.batch_k, rng)]


def sample_block_permutation(train_ids, block, n_min: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform permutation of ``train_ids`` with ``block`` contiguous.

    The block starts at a position drawn uniformly from ``[n_min, N - K]``;
    its internal order and the other instances are shuffled uniformly.
    """
    train_ids = np.asarray(train_ids, dtype=np.int64)
    block = np.asarray(block, dtype=np.int64)
    N, K = len(train_ids), len(block)
    if n_min + K > N:
        raise ValueError(f"infeasible block: n_min + K = {n_min + K} > {N}")
    rest = rng.permutation(train_ids[~np.isin(train_ids, block)])
    block = rng.permutation(block)
    start = int(rng.integers(n_min, N - K + 1))
    return np.concatenate([rest[:start], block, rest[start:]])


def evaluate_block(
    sigma,
    block,
    utility: Utility,
) -> list[MarginalSample]:
    """Marginal contributions of a contiguous block with K + 1 trainings.

    The prefix before the block is trained once, then the block members are
    added one at a time in the order they appear in ``sigma``.
    """
    sigma = np.asarray(sigma, dtype=np.int64)
    K = len(block)
    where = np.nonzero(np.isin(sigma, np.asarray(block, dtype=np.int64)))[0]
    if len(where) != K or (K and where[-1] - where[0] != K - 1):
        raise ValueError("block members are not consecutive in the permutation")
    start = int(where[0])
    digest = permutation_digest(sigma)
    prev = utility(sigma[:start])
    samples = []
    for k in range(1, K + 1):
        cur = utility(sigma[:start + k])
        samples.append(MarginalSample(int(sigma[start + k - 1]), digest, cur - prev, 1))
        prev = cur
    # the prefix training is shared; charge it to the first sample
    samples[0] = MarginalSample(samples[0].instance_id, digest, samples[0].phi, 2)
    return samples


def check_stop(state: BanditState, config: TdshapConfig, started_at: float,
               recent_deltas=()) -> bool:
    """Whether the main loop should stop before starting another iteration.

    ``recent_deltas`` holds, per completed iteration, the largest absolute
    change of any estimate in that iteration.
    """
    rule = config.stop
    if rule.max_iterations is not None and state.iteration >= rule.max_iterations:
        return True
    if rule.kind == "iterations":
        return state.iteration >= rule.n_iter
    if rule.kind == "wall_clock":
        return time.perf_counter() - started_at >= rule.seconds
    recent = list(recent_deltas)[-rule.window:]
    return len(recent) >= rule.window and all(abs(d) < rule.delta for d in recent)


class AuditLog:
    """Append-only per-iteration records, mirrored to a JSONL file if given."""

    def __init__(self, path: str | Path | None = None):
        self.records: list[dict] = []
        self._fh = open(path, "w", encoding="utf-8") if path is not None else None

    def append(self, record: dict) -> None:
        self.records.append(record)
        if self._fh is not None:
            self._fh.write(json.dumps(record) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def replay_means(audit_log: list[dict]) -> tuple[dict[int, float], dict[int, int]]:
    """Per-instance sample mean and count recomputed from audit records."""
    sums: dict[int, list[float]] = {}
    for rec in audit_log:
        for n, phi in zip(rec["arms"], rec["phi"]):
            sums.setdefault(int(n), []).append(phi)
    return ({n: float(np.mean(v)) for n, v in sums.items()},
            {n: len(v) for n, v in sums.items()})


def _warn_if_short(dataset, metric, config, n_train):
    try:
        w = width_bound(metric, dataset.label_range)
        needed = sufficient_iterations(n_train, w, config.epsilon)
    except (ValueError, RuntimeError):
        return
    if config.stop.kind == "iterations":
        budget = n_train + config.stop.n_iter * config.batch_k
        if budget < needed:
            log.warning("sample budget %d is below the sufficient count %d; the failure "
                        "bound does not apply", budget, needed)


def run(
    dataset: Dataset,
    learner: LearnerSpec,
    metric: Metric,
    config: TdshapConfig = TdshapConfig(),
    audit_path: str | Path | None = None,
) -> ValuationResult:
    ids = np.asarray(dataset.train_ids, dtype=np.int64)
    N, K = len(ids), config.batch_k
    config.validate_for(N)
    if isinstance(metric, (str, MetricKind)):
        _warn_if_short(dataset, metric, config, N)

    rng = np.random.default_rng(config.seed)
    started = time.perf_counter()
    audit = AuditLog(audit_path)
    state = BanditState.empty(ids)
    pos = {int(n): p for p, n in enumerate(ids)}

    warm: FittedModel | None = None
    if config.warm_start:
        warm = fit(learner, dataset, ids)
        state.trainings_total += 1
    utility = Utility(dataset, learner, metric, warm_from=warm)

    def step(block, phase, t):
        sigma = sample_block_permutation(ids, block, config.n_min, rng)
        before = utility.fits
        samples = evaluate_block(sigma, block, utility)
        used = utility.fits - before
        state.trainings_total += used
        deltas = [state.update(pos[s.instance_id], s.phi) for s in samples]
        audit.append({
            "phase": phase,
            "t": t,
            "arms": [s.instance_id for s in samples],
            "sigma_digest": samples[0].permutation_digest,
            "phi": [s.phi for s in samples],
            "trainings": used,
            "elapsed_ms": round(1000 * (time.perf_counter() - started), 3),
        })
        return max(abs(d) for d in deltas)

    try:
        order = rng.permutation(ids)
        for b, start in enumerate(range(0, N, K)):
            step(order[start:start + K], "init", b)
        init_trainings = state.trainings_total

        recent = deque(maxlen=config.stop.window)
        while not check_stop(state, config, started, recent):
            arms = select_arms(state, config, rng)
            recent.append(step(arms, "loop", state.iteration))
            state.iteration += 1
    finally:
        audit.close()

    harmful = sorted(int(n) for n, v in zip(ids, state.phi_hat) if v <= config.tau)
    return ValuationResult(
        ids=ids.copy(),
        phi_hat=state.phi_hat.copy(),
        pulls=state.pulls.copy(),
        tau=config.tau,
        harmful=harmful,
        audit_log=audit.records,
        trainings_total=state.trainings_total,
        init_trainings=init_trainings,
        iterations=state.iteration,
        config=config,
    )
