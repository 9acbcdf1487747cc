"""``tcnids`` command line: fixture, preprocess, train, evaluate, predict, compare."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import eval as metrics
from .errors import ArgumentError, CompatibilityError, IngestionError, StageError, TcnIdsError
from .nn import build_model, load_model, save_model
from .nn.model import BUILDERS, predict_proba
from .numerics import Rng
from .optim import TrainConfig, evaluate, train
from .pipeline import (
    CLASS_NAMES,
    REPORT_ORDER,
    PipelineConfig,
    generate_fixture,
    load_split,
    run_pipeline,
    save_split,
    write_fixture_csv,
)
from .pipeline.driver import Preprocessor
from .pipeline.table import frame_to_table

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("tcnids")

DATA_DIR_ENV = "TCNIDS_DATA_DIR"


@dataclass
class FixtureConfig:
    classes: int = 15
    per_class: int = 300
    numeric_features: int = 32
    categorical_features: int = 4
    separation: float = 4.0


@dataclass
class RunConfig:
    seed: int | None = None
    out: str = "runs"
    data: str | None = None
    fixture: FixtureConfig | None = None
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    pipeline_given: bool = False
    model: str = "tcn"
    overrides: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)

    def train_config(self) -> TrainConfig:
        if self.seed is None:
            raise ArgumentError("a seed is required for training (--seed or `seed` in the config)")
        return TrainConfig(seed=self.seed, **self.train)


def _short_hash(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(json.dumps(p, sort_keys=True, default=str).encode())
    return h.hexdigest()[:16]


def _resolve_data(path):
    if path is None:
        return None
    p = Path(path)
    if not p.exists() and not p.is_absolute() and os.environ.get(DATA_DIR_ENV):
        alt = Path(os.environ[DATA_DIR_ENV]) / p
        if alt.exists():
            return alt
    return p


def load_run_config(args) -> RunConfig:
    """Defaults, then the TOML file, then command-line flags."""
    raw = {}
    if getattr(args, "config", None):
        with open(args.config, "rb") as fh:
            raw = tomllib.load(fh)
    unknown = set(raw) - {"seed", "out", "data", "fixture", "pipeline", "model", "train"}
    if unknown:
        raise ArgumentError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig()
    cfg.seed = raw.get("seed")
    cfg.out = raw.get("out", cfg.out)
    cfg.data = raw.get("data")
    if "fixture" in raw:
        cfg.fixture = FixtureConfig(**raw["fixture"])
    if "pipeline" in raw:
        cfg.pipeline = PipelineConfig(**raw["pipeline"])
        cfg.pipeline_given = True
    model = raw.get("model", {})
    cfg.model = model.get("name", cfg.model)
    cfg.overrides = dict(model.get("overrides", {}))
    if "dilations" in cfg.overrides:
        cfg.overrides["dilations"] = tuple(cfg.overrides["dilations"])
    cfg.train = dict(raw.get("train", {}))

    for attr in ("seed", "out", "data"):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(cfg, attr, value)
    fixture_flags = {k: getattr(args, k, None) for k in asdict(FixtureConfig())}
    if any(v is not None for v in fixture_flags.values()):
        base = asdict(cfg.fixture or FixtureConfig())
        base.update({k: v for k, v in fixture_flags.items() if v is not None})
        cfg.fixture = FixtureConfig(**base)
    pipeline_flags = {"fraction": getattr(args, "fraction", None),
                      "max_categories": getattr(args, "max_categories", None),
                      "top_k": getattr(args, "top_k", None)}
    if any(v is not None for v in pipeline_flags.values()):
        base = cfg.pipeline.to_dict()
        base.update({k: v for k, v in pipeline_flags.items() if v is not None})
        cfg.pipeline = PipelineConfig(**base)
        cfg.pipeline_given = True
    for flag, key in (("epochs", "epochs"), ("lr", "learning_rate"), ("batch_size", "batch_size")):
        value = getattr(args, flag, None)
        if value is not None:
            cfg.train[key] = value
    if getattr(args, "model_name", None):
        cfg.model = args.model_name
    return cfg


# -- commands ---------------------------------------------------------------

def cmd_fixture(args) -> int:
    cfg = load_run_config(args)
    fx = cfg.fixture or FixtureConfig()
    seed = cfg.seed if cfg.seed is not None else 0
    table, labels = generate_fixture(**asdict(fx), rng=Rng(seed).child("fixture"))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"fixture-{_short_hash(asdict(fx), seed)}.csv"
    write_fixture_csv(path, table, labels)
    counts = np.bincount(labels, minlength=fx.classes)
    for i in range(fx.classes):
        print(f"{CLASS_NAMES[i]:<24}{counts[i]:>8}")
    print(f"rows {len(labels)}")
    print(f"artifacts: {path}")
    return 0


def cmd_preprocess(args) -> int:
    cfg = load_run_config(args)
    seed = cfg.seed if cfg.seed is not None else 0
    if (cfg.data is None) == (cfg.fixture is None):
        raise ArgumentError("give exactly one data source: --data CSV or a [fixture] section")
    if cfg.data is not None:
        path = _resolve_data(cfg.data)
        if not path.exists():
            raise StageError("load", IngestionError(f"cannot read {path}: file not found"))
        source = str(path)
        source_id = hashlib.sha256(path.read_bytes()).hexdigest()
    else:
        table, labels = generate_fixture(**asdict(cfg.fixture), rng=Rng(seed).child("fixture"))
        table.columns[cfg.pipeline.label_column] = np.array(
            [CLASS_NAMES[i] for i in labels], dtype=object)
        table.kinds[cfg.pipeline.label_column] = "categorical"
        source = table
        source_id = asdict(cfg.fixture)
    result = run_pipeline(source, cfg.pipeline, seed)
    out = Path(cfg.out) / f"split-{_short_hash(cfg.pipeline.to_dict(), seed, source_id)}"
    save_split(result, out)
    for name, n in result.report["partition_rows"].items():
        print(f"{name:<6}{n:>10}")
    print(f"features {len(result.split.feature_names)}")
    print(f"artifacts: {out}")
    return 0


def _load_split_checked(cfg: RunConfig):
    if cfg.data is None:
        raise ArgumentError("--data must point at a preprocessed split directory")
    loaded = load_split(_resolve_data(cfg.data))
    if cfg.pipeline_given and cfg.pipeline.digest() != loaded.sidecar["config_hash"]:
        raise CompatibilityError(
            f"pipeline config hash {cfg.pipeline.digest()} does not match the split's "
            f"{loaded.sidecar['config_hash']}; re-run preprocess with this config")
    return loaded


def _train_one(cfg: RunConfig, loaded, model_name):
    tc = cfg.train_config()
    split = loaded.split
    root = Rng(tc.seed)
    model = build_model(model_name, len(split.feature_names), len(split.classes),
                        root.child("init"), **cfg.overrides)
    model.metadata = {
        "classes": list(split.classes),
        "dataset_hash": loaded.sidecar["dataset_hash"],
        "config_hash": loaded.sidecar["config_hash"],
        "preprocessor": loaded.sidecar["preprocessor"],
        "train_config": asdict(tc),
    }
    key = _short_hash(loaded.sidecar["dataset_hash"], model_name, cfg.overrides, asdict(tc))
    out = Path(cfg.out) / f"model-{model_name}-{key}"
    out.mkdir(parents=True, exist_ok=True)
    model, logs = train(model, split.train, split.val, tc, root.child("train"),
                        log_path=out / "train_log.jsonl")
    save_model(model, out / "model.tcnm")
    return model, logs, out


def cmd_train(args) -> int:
    cfg = load_run_config(args)
    loaded = _load_split_checked(cfg)
    if cfg.model not in BUILDERS:
        raise ArgumentError(f"unknown model {cfg.model!r}; choose from {sorted(BUILDERS)}")
    _, logs, out = _train_one(cfg, loaded, cfg.model)
    last = logs[-1]
    print(f"epochs {len(logs)}")
    print(f"val_loss {last.val_loss:.4f}")
    print(f"val_accuracy {last.val_accuracy:.4f}")
    print(f"artifacts: {out}")
    return 0


def _check_compatible(model, loaded):
    if model.spec.num_classes != len(loaded.split.classes):
        raise CompatibilityError(f"model predicts {model.spec.num_classes} classes, split has "
                                 f"{len(loaded.split.classes)}")
    n_features = model.spec.input_length * model.spec.input_channels
    if n_features != len(loaded.split.feature_names):
        raise CompatibilityError(f"model expects {n_features} features, split has "
                                 f"{len(loaded.split.feature_names)}")


def evaluate_split(model, loaded, part):
    split = loaded.split.partition(part)
    scores = evaluate(model, split)
    probs = predict_proba(model, split.X)
    cm = metrics.confusion_matrix(split.y, np.argmax(probs, axis=1),
                                  len(loaded.split.classes), loaded.split.classes)
    order = REPORT_ORDER if sorted(cm.classes) == sorted(REPORT_ORDER) else None
    return scores, cm, metrics.classification_report(cm, order)


def cmd_evaluate(args) -> int:
    cfg = load_run_config(args)
    if not args.model_path:
        raise ArgumentError("--model must point at a model file")
    model = load_model(args.model_path)
    loaded = _load_split_checked(cfg)
    _check_compatible(model, loaded)
    scores, cm, report = evaluate_split(model, loaded, args.split)
    out = Path(args.out) if args.out else Path(args.model_path).parent
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{model.spec.name}-{loaded.sidecar['dataset_hash']}-{args.split}"
    formats = [args.format] if args.format else ["text", "json", "csv"]
    for fmt in formats:
        ext = "txt" if fmt == "text" else fmt
        (out / f"report-{stem}.{ext}").write_bytes(metrics.render_report(report, fmt))
    for fmt in ("csv", "svg"):
        (out / f"confusion-{stem}.{fmt}").write_bytes(metrics.render_confusion(cm, fmt))
    sys.stdout.write(metrics.render_report(report, "text").decode())
    print(f"accuracy {scores['accuracy']:.4f}")
    print(f"loss {scores['loss']:.4f}")
    print(f"artifacts: {out}")
    return 0


def cmd_predict(args) -> int:
    if not args.model_path or not args.data:
        raise ArgumentError("predict needs --model MODEL and --data CSV")
    model = load_model(args.model_path)
    if "preprocessor" not in model.metadata:
        raise CompatibilityError("model file carries no preprocessing state; train it via the CLI")
    pre = Preprocessor.from_dict(model.metadata["preprocessor"])
    table = _read_predict_csv(_resolve_data(args.data), pre)
    sink = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(sink, lineterminator="\n")
        w.writerow(["row_index", "class_name", "probability"])
        if table.n_rows:
            probs = predict_proba(model, pre.transform(table))
            pred = np.argmax(probs, axis=1)
            for i, k in enumerate(pred):
                w.writerow([i, pre.classes[k], repr(float(probs[i, k]))])
    finally:
        if args.out:
            sink.close()
    if args.out:
        print(f"artifacts: {args.out}")
    return 0


def _check_row_widths(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return
        for row in reader:
            if row and len(row) != len(header):
                raise IngestionError(f"{path}: malformed row {reader.line_num - 1}: expected "
                                     f"{len(header)} fields, found {len(row)}")


def _read_predict_csv(path, pre: Preprocessor):
    try:
        _check_row_widths(path)
        df = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8")
    except pd.errors.EmptyDataError as exc:
        raise IngestionError(f"{path} has no header row") from exc
    except pd.errors.ParserError as exc:
        raise IngestionError(f"malformed CSV {path}: {exc}") from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    present = [c for c in df.columns if c != pre.label_column]
    missing = sorted(set(pre.input_columns) - set(present))
    if missing:
        extra = sorted(set(present) - set(pre.input_columns))
        raise CompatibilityError(f"feature columns differ from training: missing {missing}, "
                                 f"unexpected {extra}")
    return frame_to_table(df[pre.input_columns], pre.schema_hints(), label_column=None)


def cmd_compare(args) -> int:
    cfg = load_run_config(args)
    loaded = _load_split_checked(cfg)
    rows = []
    for name in args.models.split(","):
        name = name.strip()
        if name not in BUILDERS:
            raise ArgumentError(f"unknown model {name!r}; choose from {sorted(BUILDERS)}")
        model, _, _ = _train_one(cfg, loaded, name)
        scores = evaluate(model, loaded.split.test)
        rows.append((name, scores["accuracy"], scores["loss"]))
    table = metrics.comparison_table(rows)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"comparison-{loaded.sidecar['dataset_hash']}.txt"
    path.write_text(table)
    sys.stdout.write(table)
    print(f"artifacts: {path}")
    return 0


# -- argument parsing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcnids", description="Preprocess network-flow CSVs, train TCN classifiers, report.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data_help):
        p.add_argument("--config", help="TOML run configuration; flags override it")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        if data_help:
            p.add_argument("--data", help=data_help + f" (relative paths also tried under ${DATA_DIR_ENV})")

    p = sub.add_parser("fixture", help="write a synthetic labelled CSV")
    common(p, None)
    p.add_argument("--classes", type=int)
    p.add_argument("--per-class", dest="per_class", type=int)
    p.add_argument("--numeric-features", dest="numeric_features", type=int)
    p.add_argument("--categorical-features", dest="categorical_features", type=int)
    p.add_argument("--separation", type=float)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("preprocess", help="clean, encode, rank, reduce, split and scale a CSV")
    common(p, "input CSV")
    p.add_argument("--fraction", type=float)
    p.add_argument("--max-categories", dest="max_categories", type=int)
    p.add_argument("--top-k", dest="top_k", type=int)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train a model on a preprocessed split")
    common(p, "split directory")
    p.add_argument("--model", dest="model_name", choices=sorted(BUILDERS))
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="write classification report and confusion matrix")
    common(p, "split directory")
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--format", choices=("text", "json", "csv"))
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify the rows of a raw CSV")
    p.add_argument("--model", dest="model_path", required=True)
    p.add_argument("--data", required=True, help="raw CSV with the training feature columns")
    p.add_argument("--out", help="predictions CSV (default: stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("compare", help="train several models on one split; print a results table")
    common(p, "split directory")
    p.add_argument("--models", default="tcn,cnn_baseline")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BrokenPipeError:
        # downstream reader (e.g. ``head``) closed early
        sys.stderr.close()
        return 0
    except (TcnIdsError, ValueError, OSError) as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
