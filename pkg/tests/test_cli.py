import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np
import pytest

from tcnids import cli
from tcnids import eval as E
from tcnids.nn import load_model
from tcnids.pipeline import load_split

SMALL = ["--per-class", "40", "--numeric-features", "6", "--categorical-features", "2"]


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def artifacts(out):
    last = out.strip().splitlines()[-1]
    assert last.startswith("artifacts: ")
    return Path(last[len("artifacts: "):])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    buf = io.StringIO()

    def call(*argv):
        import contextlib
        with contextlib.redirect_stdout(buf):
            assert cli.main([str(a) for a in argv]) == 0
        return artifacts(buf.getvalue())

    fx = call("fixture", "--seed", 1, "--out", root, *SMALL)
    split = call("preprocess", "--seed", 1, "--out", root, "--data", fx, "--fraction", 1.0)
    model_dir = call("train", "--seed", 2, "--out", root, "--data", split, "--epochs", 3)
    return {"root": root, "fixture": fx, "split": split, "model": model_dir / "model.tcnm"}


def _sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def test_fixture_default_rows(tmp_path, capsys):
    code, out, _ = run(capsys, "fixture", "--seed", 0, "--out", tmp_path)
    assert code == 0
    path = artifacts(out)
    with open(path) as fh:
        assert sum(1 for _ in fh) == 4500 + 1
    assert "Normal" in out


def test_fixture_same_seed_same_hash(tmp_path, capsys):
    hashes = []
    for sub in ("a", "b"):
        _, out, _ = run(capsys, "fixture", "--seed", 5, "--out", tmp_path / sub, *SMALL)
        hashes.append(_sha(artifacts(out)))
    assert hashes[0] == hashes[1]


def test_fixture_bad_per_class(tmp_path, capsys):
    code, _, err = run(capsys, "fixture", "--out", tmp_path, "--per-class", 0)
    assert code != 0 and "per_class" in err


def test_preprocess_partition_sizes(workspace):
    report = json.loads((workspace["split"] / "cleaning_report.json").read_text())
    assert report["partition_rows"] == {"train": 420, "val": 60, "test": 120}
    for part in ("train", "val", "test"):
        assert (workspace["split"] / f"{part}_X.bin").exists()


def test_preprocess_rerun_identical(workspace, tmp_path, capsys):
    code, out, _ = run(capsys, "preprocess", "--seed", 1, "--out", tmp_path,
                       "--data", workspace["fixture"], "--fraction", 1.0)
    assert code == 0
    again = artifacts(out)
    assert again.name == workspace["split"].name
    for f in workspace["split"].iterdir():
        assert (again / f.name).read_bytes() == f.read_bytes(), f.name


def test_preprocess_from_config(tmp_path, capsys):
    config = tmp_path / "run.toml"
    config.write_text('seed = 3\n[fixture]\nper_class = 20\nnumeric_features = 3\n'
                      'categorical_features = 1\n[pipeline]\nfraction = 0.5\n')
    code, out, _ = run(capsys, "preprocess", "--config", config, "--out", tmp_path)
    assert code == 0
    report = json.loads((artifacts(out) / "cleaning_report.json").read_text())
    assert report["rows_out"] == 150


def test_preprocess_missing_label_column(tmp_path, capsys):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n1,2\n")
    code, _, err = run(capsys, "preprocess", "--data", path, "--out", tmp_path)
    assert code != 0 and "Attack_type" in err and "[load]" in err


def test_preprocess_needs_one_source(tmp_path, capsys):
    code, _, err = run(capsys, "preprocess", "--out", tmp_path)
    assert code != 0 and "data source" in err


def test_data_dir_env(workspace, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(cli.DATA_DIR_ENV, str(workspace["fixture"].parent))
    monkeypatch.chdir(tmp_path)
    code, _, _ = run(capsys, "preprocess", "--seed", 1, "--out", tmp_path,
                     "--data", workspace["fixture"].name, "--fraction", 0.5)
    assert code == 0


def test_train_log_lines(workspace):
    lines = (workspace["model"].parent / "train_log.jsonl").read_text().splitlines()
    assert [json.loads(l)["epoch"] for l in lines] == [1, 2, 3]


def test_train_requires_seed(workspace, tmp_path, capsys):
    code, _, err = run(capsys, "train", "--out", tmp_path, "--data", workspace["split"])
    assert code != 0 and "seed" in err


def test_train_rerun_same_hash(workspace, tmp_path, capsys):
    code, out, _ = run(capsys, "train", "--seed", 2, "--out", tmp_path,
                       "--data", workspace["split"], "--epochs", 3)
    assert code == 0
    assert _sha(artifacts(out) / "model.tcnm") == _sha(workspace["model"])


def test_train_lr_zero_keeps_init(workspace, tmp_path, capsys):
    code, out, _ = run(capsys, "train", "--seed", 4, "--out", tmp_path,
                       "--data", workspace["split"], "--epochs", 1, "--lr", 0)
    assert code == 0
    trained = load_model(artifacts(out) / "model.tcnm")
    from tcnids.nn import build_model
    from tcnids.numerics import Rng
    init = build_model("tcn", trained.spec.input_length, 15, Rng(4).child("init"))
    assert all(np.array_equal(init.params[k], trained.params[k]) for k in init.params)


def test_train_config_drift(workspace, tmp_path, capsys):
    config = tmp_path / "drift.toml"
    config.write_text("[pipeline]\nfraction = 0.5\n")
    code, _, err = run(capsys, "train", "--config", config, "--seed", 2, "--out", tmp_path,
                       "--data", workspace["split"])
    assert code != 0 and "config hash" in err


def test_evaluate_outputs(workspace, tmp_path, capsys):
    code, out, _ = run(capsys, "evaluate", "--model", workspace["model"],
                       "--data", workspace["split"], "--split", "test", "--out", tmp_path)
    assert code == 0 and "accuracy" in out and "loss" in out
    reports = list(tmp_path.glob("report-tcn-*-test.json"))
    assert len(reports) == 1
    report = json.loads(reports[0].read_text())
    assert report["weighted_avg"]["recall"] == report["accuracy"]
    assert len(list(tmp_path.glob("confusion-tcn-*-test.svg"))) == 1
    assert len(list(tmp_path.glob("report-tcn-*-test.txt"))) == 1


def test_evaluate_class_mismatch(workspace, tmp_path, capsys):
    from tcnids.nn import build_model, save_model
    from tcnids.numerics import Rng
    n = len(load_split(workspace["split"]).split.feature_names)
    path = save_model(build_model("tcn", n, 3, Rng(0), channels=2, dense_units=2),
                      tmp_path / "m.tcnm")
    code, _, err = run(capsys, "evaluate", "--model", path, "--data", workspace["split"])
    assert code != 0 and "classes" in err


def test_predict_reproduces_confusion(workspace, tmp_path, capsys):
    # predict on the raw fixture rows; evaluate on the same rows via the split
    raw = tmp_path / "raw.csv"
    split = load_split(workspace["split"])
    pre = split.preprocessor
    src = list(csv.DictReader(open(workspace["fixture"])))
    with open(raw, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(pre.input_columns + ["Attack_type"])
        for row in src:
            w.writerow([row[c] for c in pre.input_columns] + [row["Attack_type"]])
    out_csv = tmp_path / "pred.csv"
    code, out, _ = run(capsys, "predict", "--model", workspace["model"], "--data", raw,
                       "--out", out_csv)
    assert code == 0 and artifacts(out) == out_csv
    rows = list(csv.DictReader(open(out_csv)))
    assert len(rows) == len(src)
    names = list(split.split.classes)
    y_true = [names.index(r["Attack_type"]) for r in src]
    y_pred = [names.index(r["class_name"]) for r in rows]
    from_predict = E.confusion_matrix(y_true, y_pred, 15).counts

    model = load_model(workspace["model"])
    from tcnids.nn.model import predict
    from tcnids.pipeline import load_csv
    table = load_csv(raw, pre.schema_hints())
    X = pre.transform(table)
    direct = E.confusion_matrix(y_true, predict(model, X), 15).counts
    assert np.array_equal(from_predict, direct)

    # fraction=1.0 keeps every row, so the union of the three partitions is the CSV
    total = sum(cli.evaluate_split(model, split, p)[1].counts for p in ("train", "val", "test"))
    assert np.array_equal(total, from_predict)


def test_predict_empty_input(workspace, tmp_path, capsys):
    pre = load_split(workspace["split"]).preprocessor
    path = tmp_path / "empty.csv"
    path.write_text(",".join(pre.input_columns) + "\n")
    code, out, _ = run(capsys, "predict", "--model", workspace["model"], "--data", path)
    assert code == 0 and out == "row_index,class_name,probability\n"


def test_predict_malformed_row(workspace, tmp_path, capsys):
    pre = load_split(workspace["split"]).preprocessor
    path = tmp_path / "bad.csv"
    good = ",".join("1" if not c.startswith("cat") else "c0v0" for c in pre.input_columns)
    path.write_text(",".join(pre.input_columns) + "\n" + good + "\n" + "1,2\n")
    code, _, err = run(capsys, "predict", "--model", workspace["model"], "--data", path)
    assert code != 0 and "row 2" in err


def test_predict_missing_columns(workspace, tmp_path, capsys):
    path = tmp_path / "cols.csv"
    path.write_text("zzz\n1\n")
    code, _, err = run(capsys, "predict", "--model", workspace["model"], "--data", path)
    assert code != 0 and "missing" in err and "zzz" in err


def test_compare_table(workspace, tmp_path, capsys):
    code, out, _ = run(capsys, "compare", "--seed", 2, "--out", tmp_path,
                       "--data", workspace["split"], "--epochs", 1)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].split() == ["Model", "Test", "Accuracy", "Test", "Loss"]
    assert [l.split()[0] for l in lines[1:3]] == ["tcn", "cnn_baseline"]
    assert artifacts(out).read_text() == "\n".join(lines[:3]) + "\n"
