"""End-to-end data cleansing experiments.

Per seed: split the data, optionally corrupt training labels, value the
training instances, order them lowest-value first, pick the number of
instances to remove by validation score, then report test scores.

Test labels are touched only after the removal count has been fixed. Every
metric call made by the pipeline is recorded in ``SeedResult.eval_log`` so
this can be checked.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import metrics
from .baselines import (BaselineConfig, ValuationVector, exact_shapley, loo_grouped,
                        random_order, tmc_shapley)
from .dataset import (Dataset, inject_label_noise, load_csv, make_classification,
                      make_regression, split)
from .engine import StopRule, TdshapConfig, ValuationResult
from .engine import run as run_tdshap
from .learners import FittedModel, LearnerSpec, fit

log = logging.getLogger(__name__)

METHODS = ("tdshap", "tmc", "exact", "loo", "random")


@dataclass
class ExperimentConfig:
    data: dict
    sizes: tuple[int, int, int]
    learner: dict = field(default_factory=lambda: {"kind": "cart_tree"})
    metric: str = "neg_mae"
    method: str = "tdshap"
    method_params: dict = field(default_factory=dict)
    grid_step: int | None = None
    seeds: list[int] = field(default_factory=lambda: [0])
    noise: dict | None = None
    output_dir: str | None = None
    workers: int | None = None

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.grid_step is not None and self.grid_step < 1:
            raise ValueError(f"grid_step must be >= 1, got {self.grid_step}")
        metrics.MetricKind(self.metric)
        self.learner_spec  # validates hyperparameters

    @property
    def learner_spec(self) -> LearnerSpec:
        return LearnerSpec(self.learner["kind"], dict(self.learner.get("params", {})))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sizes"] = list(self.sizes)
        return d


def load_data(source: dict) -> Dataset:
    if "csv" in source:
        return load_csv(source["csv"], label=source["label"],
                        task=source.get("task", "regression"),
                        features=source.get("features"),
                        n_classes=source.get("n_classes"))
    if "synthetic" in source:
        kind = source["synthetic"]
        kw = {k: v for k, v in source.items() if k != "synthetic"}
        if kind == "regression":
            return make_regression(**kw)
        if kind == "classification":
            return make_classification(**kw)
        raise ValueError(f"unknown synthetic dataset {kind!r}")
    raise ValueError("data source needs a 'csv' or 'synthetic' entry")


class Evaluator:
    """Fits on training subsets and scores on validation or test, logging each call."""

    def __init__(self, dataset: Dataset, learner: LearnerSpec, metric):
        self.dataset = dataset
        self.learner = learner
        self.metric = metric
        self.calls: list[tuple[str, str]] = []
        self.fits = 0
        self.timing: dict[str, float] = {}
        self._phase = "setup"
        self._since = time.perf_counter()

    @property
    def phase(self) -> str:
        return self._phase

    @phase.setter
    def phase(self, name: str) -> None:
        now = time.perf_counter()
        self.timing[self._phase] = self.timing.get(self._phase, 0.0) + now - self._since
        self._phase, self._since = name, now

    def fit(self, ids) -> FittedModel:
        self.fits += 1
        return fit(self.learner, self.dataset, ids)

    def _score(self, model, ids, split_name):
        self.calls.append((self.phase, split_name))
        return metrics.evaluate(model, self.dataset.X[ids], self.dataset.y[ids], self.metric)

    def val(self, model) -> float:
        return self._score(model, self.dataset.val_ids, "val")

    def test(self, model) -> float:
        return self._score(model, self.dataset.test_ids, "test")


def removal_order(valuation, train_ids=None) -> list[int]:
    """Instances ordered lowest contribution first; ties go to the lower id.

    Accepts a ValuationVector, a ValuationResult, an ``{id: phi}`` mapping, or
    an already ordered list (returned unchanged).
    """
    if isinstance(valuation, (ValuationVector, ValuationResult)):
        phi = valuation.as_dict()
    elif isinstance(valuation, dict):
        phi = {int(k): float(v) for k, v in valuation.items()}
    else:
        order = [int(i) for i in valuation]
        if train_ids is not None and sorted(order) != sorted(int(i) for i in train_ids):
            raise ValueError("ordered list does not cover the training ids exactly")
        return order
    if train_ids is not None:
        missing = set(int(i) for i in train_ids) - set(phi)
        if missing:
            raise ValueError(f"valuation is missing ids {sorted(missing)[:10]}")
    return sorted(phi, key=lambda n: (phi[n], n))


def default_grid_step(n_train: int) -> int:
    return max(1, n_train // 50)


def choose_n_remove(
    order: Sequence[int],
    dataset: Dataset,
    learner: LearnerSpec | None = None,
    metric=None,
    grid_step: int | None = None,
    evaluator: Evaluator | None = None,
    with_test: bool = True,
) -> tuple[int, list[dict]]:
    """Pick the removal count on a grid by validation score.

    Retrains on the training set minus each prefix of ``order`` of length
    0, g, 2g, ... (stopping before the set would be empty) and returns the
    smallest count with the best validation score. Test scores for the curve
    are computed afterwards, for plotting only.
    """
    if evaluator is None:
        evaluator = Evaluator(dataset, learner, metric)
    train = np.asarray(dataset.train_ids)
    if grid_step is None:
        grid_step = default_grid_step(len(train))
    if grid_step < 1:
        raise ValueError(f"grid_step must be >= 1, got {grid_step}")
    order = np.asarray(order, dtype=np.int64)

    evaluator.phase = "sweep"
    curve, models = [], []
    for n_remove in range(0, len(train), grid_step):
        keep = train[~np.isin(train, order[:n_remove])]
        model = evaluator.fit(keep)
        curve.append({"n_remove": n_remove, "val_V": evaluator.val(model), "test_V": None})
        models.append(model)
    best = max(range(len(curve)), key=lambda i: (curve[i]["val_V"], -i))

    if with_test:
        evaluator.phase = "final"
        for point, model in zip(curve, models):
            point["test_V"] = evaluator.test(model)
    return curve[best]["n_remove"], curve


@dataclass
class SeedResult:
    seed: int
    n_remove: int = 0
    baseline_val: float = float("nan")
    baseline_test: float = float("nan")
    cleansed_val: float = float("nan")
    cleansed_test: float = float("nan")
    trainings_total: int = 0
    recall: float | None = None
    n_corrupted: int = 0
    timing: dict = field(default_factory=dict)
    curve: list = field(default_factory=list)
    valuation: list = field(default_factory=list)
    eval_log: list = field(default_factory=list)
    error: str | None = None

    def row(self) -> dict:
        d = asdict(self)
        for k in ("curve", "valuation", "eval_log"):
            d.pop(k)
        return d


@dataclass
class CleansingReport:
    config: dict
    seeds: list[SeedResult]

    @property
    def completed(self) -> list[SeedResult]:
        return [s for s in self.seeds if s.error is None]

    def aggregate(self) -> dict:
        done = self.completed
        out: dict[str, Any] = {"n_completed": len(done), "n_failed": len(self.seeds) - len(done)}
        if not done:
            return out
        for key in ("baseline_test", "cleansed_test", "baseline_val", "cleansed_val"):
            vals = np.array([getattr(s, key) for s in done])
            out[f"{key}_mean"] = float(vals.mean())
            out[f"{key}_std"] = float(vals.std())
        gains = np.array([s.cleansed_test - s.baseline_test for s in done])
        out["improvement_mean"] = float(gains.mean())
        out["improved_seeds"] = int((gains > 0).sum())
        recalls = [s.recall for s in done if s.recall is not None]
        if recalls:
            out["recall_mean"] = float(np.mean(recalls))
        return out

    def to_json(self, timing: bool = True) -> dict:
        rows = []
        for s in sorted(self.seeds, key=lambda s: s.seed):
            r = s.row()
            if not timing:
                r.pop("timing")
            rows.append(r)
        return {"config": self.config, "per_seed": rows, "aggregate": self.aggregate()}


def _value(method, params, ds, learner, metric, seed, audit_path):
    """Run one valuation method; returns (removal order, phi rows, trainings)."""
    if method == "tdshap":
        stop = params.get("stop")
        if stop is None:
            stop = StopRule.iterations(int(params.get("n_iter", 50)))
        elif isinstance(stop, dict):
            stop = StopRule(**stop)
        eps = float(params.get("epsilon", 0.1))
        cfg = TdshapConfig(epsilon=eps, tau=params.get("tau", -eps),
                           n_min=int(params.get("n_min", 0)),
                           batch_k=int(params.get("batch_k", 1)), stop=stop, seed=seed,
                           warm_start=bool(params.get("warm_start", False)))
        res = run_tdshap(ds, learner, metric, cfg, audit_path=audit_path)
        rows = [(int(i), float(v)) for i, v in zip(res.ids, res.phi_hat)]
        return removal_order(res), rows, res.trainings_total
    if method in ("tmc", "exact"):
        if method == "exact":
            vec = exact_shapley(ds, learner, metric)
        else:
            cfg = BaselineConfig(n_perm=int(params.get("n_perm", 100)),
                                 truncation_tol=params.get("truncation_tol"))
            vec = tmc_shapley(ds, learner, metric, cfg, seed=seed)
        return removal_order(vec), [(int(i), float(v)) for i, v in zip(vec.ids, vec.phi)], \
            vec.trainings
    if method == "loo":
        utility = metrics.Utility(ds, learner, metric)
        order, scores = loo_grouped(ds, learner, metric, int(params.get("n_loo", 1)),
                                    utility=utility, return_scores=True)
        return order, [(n, scores[n]) for n in sorted(scores)], utility.fits
    order = random_order(ds.train_ids, seed)
    return order, [(n, float("nan")) for n in sorted(order)], 0


def run_seed(config: ExperimentConfig, seed: int, base: Dataset | None = None) -> SeedResult:
    out = SeedResult(seed=seed)
    base = load_data(config.data) if base is None else base
    ds = base.with_split(split(base, config.sizes, seed))
    corrupted = np.empty(0, dtype=np.int64)
    if config.noise:
        noise = dict(config.noise)
        offset = noise.pop("offset", None)
        offset_sd = noise.pop("offset_sd", None)
        if offset_sd is not None:
            offset = offset_sd * float(ds.y[ds.train_ids].std())
        ds, corrupted = inject_label_noise(ds, noise.pop("fraction"),
                                           noise.pop("mode", "add_offset"),
                                           seed=seed, offset=offset)
        if noise:
            raise ValueError(f"unknown noise fields {sorted(noise)}")
    out.n_corrupted = len(corrupted)

    learner = config.learner_spec
    metric = metrics.MetricKind(config.metric)
    evaluator = Evaluator(ds, learner, metric)
    audit_path = None
    if config.output_dir and config.method == "tdshap":
        audit_path = Path(config.output_dir) / f"audit_seed{seed}.jsonl"

    evaluator.phase = "valuation"
    order, rows, trainings = _value(config.method, config.method_params, ds, learner,
                                    metric, seed, audit_path)
    n_remove, curve = choose_n_remove(order, ds, grid_step=config.grid_step,
                                      evaluator=evaluator, with_test=True)
    evaluator.phase = "done"
    by_count = {p["n_remove"]: p for p in curve}

    out.n_remove = n_remove
    out.baseline_val = by_count[0]["val_V"]
    out.baseline_test = by_count[0]["test_V"]
    out.cleansed_val = by_count[n_remove]["val_V"]
    out.cleansed_test = by_count[n_remove]["test_V"]
    out.trainings_total = trainings
    if len(corrupted):
        removed = set(order[:n_remove])
        out.recall = len(removed & set(corrupted.tolist())) / len(corrupted)
    out.timing = {f"{k}_s": v for k, v in evaluator.timing.items() if k != "setup"}
    out.curve = curve
    out.valuation = rows
    out.eval_log = list(evaluator.calls)
    return out


def _safe_run_seed(config, seed):
    try:
        return run_seed(config, seed)
    except Exception as exc:  # per-seed failures are reported, not fatal
        log.warning("seed %s failed: %s", seed, exc)
        return SeedResult(seed=seed, error=f"{type(exc).__name__}: {exc}")


def worker_count(config: ExperimentConfig) -> int:
    if config.workers is not None:
        return max(1, int(config.workers))
    env = os.environ.get("TDSHAP_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_experiment(config: ExperimentConfig) -> CleansingReport:
    seeds = sorted(config.seeds)
    workers = min(worker_count(config), len(seeds))
    if config.output_dir:
        Path(config.output_dir).mkdir(parents=True, exist_ok=True)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_safe_run_seed, [config] * len(seeds), seeds))
    else:
        results = [_safe_run_seed(config, s) for s in seeds]
    report = CleansingReport(config=config.to_dict(), seeds=results)
    failed = [r.seed for r in results if r.error]
    if failed:
        log.warning("aggregate over %d completed seeds; failed: %s",
                    len(results) - len(failed), failed)
    if config.output_dir:
        write_outputs(report, config.method, Path(config.output_dir))
    return report


def write_outputs(report: CleansingReport, method: str, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
    for s in report.completed:
        with open(out_dir / f"curve_seed{s.seed}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["n_remove", "val_V", "test_V"])
            for p in s.curve:
                w.writerow([p["n_remove"], repr(p["val_V"]), repr(p["test_V"])])
        write_valuation_csv(out_dir / f"valuation_seed{s.seed}.csv", s.valuation, method)


def write_valuation_csv(path, rows, method: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["instance_id", "phi", "method"])
        for n, phi in rows:
            w.writerow([n, "" if phi != phi else repr(phi), method])
