"""Learner-free thresholding-bandit testbed with bounded synthetic arms.

Trials run in lockstep as rows of an array. Trials are grouped into chunks
of ``chunk`` rows, and each chunk draws from its own generator seeded with
``(seed, chunk index)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .engine import apt_indices, argmin_random_ties
from .theory import failure_bound, sufficient_iterations

ARM_KINDS = ("bernoulli_shifted", "uniform", "two_point")


@dataclass(frozen=True)
class SyntheticArm:
    """Bounded reward distribution.

    * ``bernoulli_shifted(p, lo, hi)``: ``hi`` with probability ``p``, else ``lo``
    * ``uniform(lo, hi)``
    * ``two_point(a, b, p)``: ``a`` with probability ``p``, else ``b``
    """

    kind: str
    a: float
    b: float
    p: float = 0.5

    def __post_init__(self):
        if self.kind not in ARM_KINDS:
            raise ValueError(f"unknown arm distribution {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"probability must lie in [0, 1], got {self.p}")
        if self.kind != "two_point" and self.a > self.b:
            raise ValueError(f"lower end {self.a} exceeds upper end {self.b}")

    @classmethod
    def bernoulli_shifted(cls, p, lo, hi):
        return cls("bernoulli_shifted", lo, hi, p)

    @classmethod
    def uniform(cls, lo, hi):
        return cls("uniform", lo, hi)

    @classmethod
    def two_point(cls, a, b, p):
        return cls("two_point", a, b, p)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticArm":
        kind = d["kind"]
        if kind == "uniform":
            return cls.uniform(d["lo"], d["hi"])
        if kind == "bernoulli_shifted":
            return cls.bernoulli_shifted(d["p"], d["lo"], d["hi"])
        if kind == "two_point":
            return cls.two_point(d["a"], d["b"], d["p"])
        raise ValueError(f"unknown arm distribution {kind!r}")

    @property
    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5 * (self.a + self.b)
        if self.kind == "bernoulli_shifted":
            return self.a + self.p * (self.b - self.a)
        return self.p * self.a + (1.0 - self.p) * self.b

    @property
    def width(self) -> float:
        return abs(self.b - self.a)

    def _table(self):
        # (is_uniform, low value, high value, probability of the high value)
        if self.kind == "uniform":
            return 1.0, self.a, self.b, 0.0
        if self.kind == "bernoulli_shifted":
            return 0.0, self.a, self.b, self.p
        return 0.0, self.b, self.a, self.p

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return _draw(np.array([self._table()]), np.zeros(size, dtype=np.int64), rng.random(size))


def _draw(table: np.ndarray, arm: np.ndarray, u: np.ndarray) -> np.ndarray:
    uni, lo, hi, p_hi = table[arm].T
    two = np.where(u < p_hi, hi, lo)
    return np.where(uni > 0, lo + u * (hi - lo), two)


@dataclass(frozen=True)
class SimOutcome:
    policy: str
    trials: int
    failures: int
    failure_rate: float
    bound: float
    T: int
    mean_pulls: tuple[float, ...]

    def to_dict(self) -> dict:
        return asdict(self)


def run_policy(arms, tau, epsilon, T, n_trials, rng, policy="apt"):
    """Run ``n_trials`` lockstep trials; returns (empirical means, pull counts)."""
    N = len(arms)
    table = np.array([a._table() for a in arms])
    rows = np.arange(n_trials)
    sums = np.zeros((n_trials, N))
    counts = np.zeros((n_trials, N))
    for n in range(N):
        sums[:, n] = _draw(table, np.full(n_trials, n), rng.random(n_trials))
        counts[:, n] = 1.0
    for t in range(N, T):
        if policy == "apt":
            arm = argmin_random_ties(apt_indices(sums / counts, counts, tau, epsilon), rng)
        else:
            arm = np.full(n_trials, t % N)
        sums[rows, arm] += _draw(table, arm, rng.random(n_trials))
        counts[rows, arm] += 1.0
    return sums / counts, counts


def failed(mu: np.ndarray, mu_hat: np.ndarray, tau: float, epsilon: float) -> np.ndarray:
    """Per-trial failure: a clearly-low arm left out, or a clearly-high arm flagged."""
    harmful = mu_hat <= tau
    low = mu <= tau - epsilon
    high = mu >= tau + epsilon
    return np.any((low & ~harmful) | (high & harmful), axis=1)


def _simulate(policy, arms, tau, epsilon, T, trials, seed, chunk):
    arms = list(arms)
    N = len(arms)
    if N == 0:
        raise ValueError("no arms")
    if T < N:
        raise ValueError(f"T={T} is below the number of arms {N}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    mu = np.array([a.mean for a in arms])
    failures = 0
    pulls = np.zeros(N)
    for c, start in enumerate(range(0, trials, chunk)):
        m = min(chunk, trials - start)
        rng = np.random.default_rng([seed, c])
        mu_hat, counts = run_policy(arms, tau, epsilon, T, m, rng, policy)
        failures += int(failed(mu, mu_hat, tau, epsilon).sum())
        pulls += counts.sum(axis=0)

    w = max(a.width for a in arms)
    if w == 0 or T >= sufficient_iterations(N, w, epsilon):
        bound = failure_bound(N, T)
    else:
        bound = 1.0
    return SimOutcome(policy, trials, failures, failures / trials, bound, T,
                      tuple(float(x) for x in pulls / trials))


def simulate_apt(arms, tau, epsilon, T, trials, seed=0, chunk=2500) -> SimOutcome:
    return _simulate("apt", arms, tau, epsilon, T, trials, seed, chunk)


def simulate_uniform(arms, tau, epsilon, T, trials, seed=0, chunk=2500) -> SimOutcome:
    """Round-robin allocation at the same budget, for comparison with APT."""
    return _simulate("uniform", arms, tau, epsilon, T, trials, seed, chunk)
