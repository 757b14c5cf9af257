import csv
import json

import numpy as np
import pytest

from tdshap.cli import main
from tdshap.dataset import make_regression


@pytest.fixture
def csv_path(tmp_path):
    ds = make_regression(40, n_features=2, seed=0)
    p = tmp_path / "data.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "b", "target"])
        for x, y in zip(ds.X, ds.y):
            w.writerow([*x, y])
    return p


def read_rows(text):
    return list(csv.DictReader(text.splitlines()))


@pytest.mark.parametrize("method", ["tdshap", "tmc", "loo", "random"])
def test_value_methods(csv_path, capsys, method):
    code = main(["value", "--csv", str(csv_path), "--label", "target", "--sizes", "12,14,14",
                 "--learner", "knn", "--param", "k=3", "--method", method, "--n-iter", "5",
                 "--n-perm", "2", "--batch-k", "2"])
    assert code == 0
    rows = read_rows(capsys.readouterr().out)
    assert len(rows) == 12
    assert {r["method"] for r in rows} == {method}


def test_value_writes_file_and_audit(csv_path, tmp_path):
    out, audit = tmp_path / "v.csv", tmp_path / "a.jsonl"
    assert main(["value", "--csv", str(csv_path), "--label", "target", "--sizes", "12,14,14",
                 "--n-iter", "3", "--out", str(out), "--audit", str(audit)]) == 0
    assert len(read_rows(out.read_text())) == 12
    assert len(audit.read_text().splitlines()) == 12 + 3


def test_oracle(csv_path, capsys):
    assert main(["oracle", "--csv", str(csv_path), "--label", "target", "--sizes", "5,20,15",
                 "--learner", "ridge"]) == 0
    rows = read_rows(capsys.readouterr().out)
    assert len(rows) == 5 and rows[0]["method"] == "exact"


def test_oracle_too_large(csv_path, capsys):
    code = main(["oracle", "--csv", str(csv_path), "--label", "target", "--sizes", "10,15,15"])
    assert code == 2
    assert "limited" in capsys.readouterr().err


def test_missing_csv(tmp_path, capsys):
    code = main(["value", "--csv", str(tmp_path / "nope.csv"), "--label", "y", "--sizes", "1,1,1"])
    assert code == 2


def test_theory(capsys):
    assert main(["theory", "--n", "10", "--metric", "accuracy", "--epsilon", "0.1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["w_bound"] == 2.0 and out["h_upper"] == pytest.approx(1000.0)
    assert out["log_base"] == "e"


def test_theory_tree(capsys):
    assert main(["theory", "--n", "10", "--metric", "neg_mse", "--epsilon", "0.5",
                 "--y-min", "0", "--y-max", "1", "--n-instance", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["w_bound"] == 1.0


def test_simulate(tmp_path, capsys):
    cfg = tmp_path / "sim.json"
    cfg.write_text(json.dumps({
        "arms": [{"kind": "uniform", "lo": -0.7, "hi": 0.3},
                 {"kind": "two_point", "a": 1.0, "b": 0.0, "p": 0.9},
                 {"kind": "bernoulli_shifted", "p": 0.5, "lo": -1.0, "hi": 0.0}],
        "tau": 0.0, "epsilon": 0.1, "T": 30, "trials": 200, "seed": 1, "compare_uniform": True,
    }))
    assert main(["simulate-bandit", "--config", str(cfg)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["apt"]["trials"] == 200 and "uniform" in out


def test_cleanse(csv_path, tmp_path, capsys):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({
        "data": {"synthetic": "regression", "n": 40}, "sizes": [12, 14, 14],
        "learner": {"kind": "cart_tree", "params": {"max_depth": 2}},
        "method": "tdshap", "method_params": {"n_iter": 3}, "seeds": [0], "workers": 1,
    }))
    out_dir = tmp_path / "out"
    assert main(["cleanse", "--config", str(cfg), "--csv", str(csv_path), "--label", "target",
                 "--output-dir", str(out_dir)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["config"]["data"]["csv"] == str(csv_path)
    assert (out_dir / "report.json").exists()
