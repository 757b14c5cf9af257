"""Command line entry point: ``tdshap <subcommand>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import harness
from .baselines import BaselineConfig, exact_shapley, loo_grouped, random_order, tmc_shapley
from .dataset import load_csv, split
from .engine import StopRule, TdshapConfig
from .engine import run as run_tdshap
from .learners import LearnerSpec
from .simulator import SyntheticArm, simulate_apt, simulate_uniform
from .theory import theory_report


def _params(pairs):
    out = {}
    for item in pairs or []:
        key, _, raw = item.partition("=")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _sizes(text):
    sizes = tuple(int(s) for s in text.split(","))
    if len(sizes) != 3:
        raise argparse.ArgumentTypeError("sizes must be n_train,n_val,n_test")
    return sizes


def _add_data_args(p):
    p.add_argument("--csv", required=True, help="headered CSV file")
    p.add_argument("--label", required=True, help="label column name")
    p.add_argument("--task", default="regression", choices=["regression", "classification"])
    p.add_argument("--features", help="comma-separated feature columns (default: all others)")
    p.add_argument("--sizes", type=_sizes, required=True, help="n_train,n_val,n_test")
    p.add_argument("--learner", default="cart_tree")
    p.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="learner hyperparameter, repeatable")
    p.add_argument("--metric", default="neg_mae", choices=["accuracy", "neg_mae", "neg_mse"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="valuation CSV path (default: stdout)")


def _load(args):
    features = args.features.split(",") if args.features else None
    ds = load_csv(args.csv, args.label, task=args.task, features=features)
    ds = ds.with_split(split(ds, args.sizes, args.seed))
    return ds, LearnerSpec(args.learner, _params(args.param))


def _emit_valuation(rows, method, out):
    if out:
        harness.write_valuation_csv(out, rows, method)
    else:
        print("instance_id,phi,method")
        for n, phi in rows:
            print(f"{n},{'' if phi != phi else repr(phi)},{method}")


def cmd_cleanse(args):
    cfg = harness.ExperimentConfig.from_json(args.config)
    if args.csv:
        cfg.data = {**cfg.data, "csv": args.csv}
        cfg.data.pop("synthetic", None)
    if args.label:
        cfg.data = {**cfg.data, "label": args.label}
    if args.output_dir:
        cfg.output_dir = args.output_dir
    report = harness.run_experiment(cfg)
    print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    return 0 if report.completed else 1


def cmd_value(args):
    ds, learner = _load(args)
    if args.method == "tdshap":
        cfg = TdshapConfig(epsilon=args.epsilon, tau=args.tau, n_min=args.n_min,
                           batch_k=args.batch_k, stop=StopRule.iterations(args.n_iter),
                           seed=args.seed)
        res = run_tdshap(ds, learner, args.metric, cfg, audit_path=args.audit)
        rows = list(zip(res.ids.tolist(), res.phi_hat.tolist()))
    elif args.method == "tmc":
        vec = tmc_shapley(ds, learner, args.metric,
                          BaselineConfig(n_perm=args.n_perm, truncation_tol=args.truncation_tol),
                          seed=args.seed)
        rows = list(zip(vec.ids.tolist(), vec.phi.tolist()))
    elif args.method == "loo":
        _, scores = loo_grouped(ds, learner, args.metric, args.n_loo, return_scores=True)
        rows = sorted(scores.items())
    else:
        rows = [(n, float("nan")) for n in sorted(random_order(ds.train_ids, args.seed))]
    _emit_valuation(rows, args.method, args.out)
    return 0


def cmd_oracle(args):
    ds, learner = _load(args)
    vec = exact_shapley(ds, learner, args.metric, exact_max=args.exact_max)
    _emit_valuation(list(zip(vec.ids.tolist(), vec.phi.tolist())), "exact", args.out)
    return 0


def cmd_simulate(args):
    with open(args.config, encoding="utf-8") as fh:
        scenario = json.load(fh)
    arms = [SyntheticArm.from_dict(a) for a in scenario["arms"]]
    kw = dict(tau=scenario["tau"], epsilon=scenario["epsilon"], T=scenario["T"],
              trials=scenario.get("trials", 1000), seed=scenario.get("seed", 0))
    out = {"apt": simulate_apt(arms, **kw).to_dict()}
    if scenario.get("compare_uniform"):
        out["uniform"] = simulate_uniform(arms, **kw).to_dict()
    print(json.dumps(out, indent=2))
    return 0


def cmd_theory(args):
    label_range = None
    if args.y_min is not None or args.y_max is not None:
        if args.y_min is None or args.y_max is None:
            raise SystemExit("--y-min and --y-max go together")
        label_range = (args.y_min, args.y_max)
    report = theory_report(args.n, args.metric, args.epsilon, label_range, args.n_instance)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tdshap", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cleanse", help="run a cleansing experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--csv", help="override the CSV path in the config")
    p.add_argument("--label", help="override the label column in the config")
    p.add_argument("--output-dir", help="override the output directory in the config")
    p.set_defaults(func=cmd_cleanse)

    p = sub.add_parser("value", help="value training instances of a CSV dataset")
    _add_data_args(p)
    p.add_argument("--method", default="tdshap", choices=["tdshap", "tmc", "loo", "random"])
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--tau", type=float, default=None, help="default: -epsilon")
    p.add_argument("--n-min", type=int, default=0)
    p.add_argument("--batch-k", type=int, default=1)
    p.add_argument("--n-iter", type=int, default=50)
    p.add_argument("--audit", help="write the TDShap audit log (JSONL) here")
    p.add_argument("--n-perm", type=int, default=100)
    p.add_argument("--truncation-tol", type=float, default=None)
    p.add_argument("--n-loo", type=int, default=1)
    p.set_defaults(func=cmd_value)

    p = sub.add_parser("oracle", help="exact data Shapley values (small training sets)")
    _add_data_args(p)
    p.add_argument("--exact-max", type=int, default=8)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("simulate-bandit", help="APT on synthetic arms from a JSON scenario")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("theory", help="print the iteration/failure bounds as JSON")
    p.add_argument("--n", type=int, required=True, help="number of training instances")
    p.add_argument("--metric", default="accuracy", choices=["accuracy", "neg_mae", "neg_mse"])
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--y-min", type=float)
    p.add_argument("--y-max", type=float)
    p.add_argument("--n-instance", type=int, help="tree leaf floor (neg_mse only)")
    p.set_defaults(func=cmd_theory)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
