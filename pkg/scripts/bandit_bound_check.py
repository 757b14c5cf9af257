"""Empirical failure rate of APT against the sufficient-iteration bound.

For each epsilon, five uniform arms of width 1 sit at tau +/- 2eps,
tau +/- 4eps and tau + 8eps. The budget T is the sufficient iteration
count, and the failure rate is compared with the failure bound. A round-robin
policy at the same budget is reported alongside.

    python3 scripts/bandit_bound_check.py --eps 0.5 0.25 --trials 10000
"""

import argparse
import json

from tdshap.simulator import SyntheticArm, simulate_apt, simulate_uniform
from tdshap.theory import sufficient_iterations


def arms_for(eps, tau=0.0):
    centres = [tau - 2 * eps, tau + 2 * eps, tau - 4 * eps, tau + 4 * eps, tau + 8 * eps]
    return [SyntheticArm.uniform(c - 0.5, c + 0.5) for c in centres]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps", type=float, nargs="+", default=[0.5, 0.25])
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rows = []
    for eps in args.eps:
        T = sufficient_iterations(5, 1.0, eps)
        apt = simulate_apt(arms_for(eps), 0.0, eps, T, args.trials, seed=args.seed)
        uni = simulate_uniform(arms_for(eps), 0.0, eps, T, args.trials, seed=args.seed)
        rows.append({"epsilon": eps, "T": T, "apt_failure_rate": apt.failure_rate,
                     "uniform_failure_rate": uni.failure_rate, "bound": apt.bound})
        print(json.dumps(rows[-1]))


if __name__ == "__main__":
    main()
