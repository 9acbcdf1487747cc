"""End-to-end preprocessing and on-disk DatasetSplit artifacts."""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ArgumentError, CompatibilityError, IngestionError, StageError
from ..numerics import Rng
from ..optim import Split
from .chi2 import chi2_rank, select_top_k
from .encode import EncodingMap, apply_encoding, fit_encoding
from .fixture import CLASS_NAMES, class_index
from .scaler import ScalerParams, apply_scaler, fit_scaler
from .split import DEFAULT_FRACTIONS, DatasetSplit, stratified_indices, stratified_split_indices
from .table import CATEGORICAL, LABEL_COLUMN, NUMERIC, RawTable, dedup_columns, dedup_rows, drop_columns, load_csv

# timestamps, host addresses, raw payload/URI fields, the constant icmp.unused,
# and the binary label (it would leak the target)
DEFAULT_DROP = (
    "frame.time",
    "ip.src_host",
    "ip.dst_host",
    "arp.src.proto_ipv4",
    "arp.dst.proto_ipv4",
    "http.file_data",
    "http.request.full_uri",
    "http.request.uri.query",
    "tcp.options",
    "tcp.payload",
    "tcp.srcport",
    "udp.port",
    "mqtt.msg",
    "icmp.unused",
    "Attack_label",
)


@dataclass
class PipelineConfig:
    label_column: str = LABEL_COLUMN
    drop: tuple = DEFAULT_DROP
    max_categories: int = 24
    fraction: float = 0.25
    split: tuple = DEFAULT_FRACTIONS
    top_k: int | None = None
    schema_hints: dict = field(default_factory=dict)

    def __post_init__(self):
        self.drop = tuple(self.drop)
        self.split = tuple(float(f) for f in self.split)
        if not 0.0 < self.fraction <= 1.0:
            raise ArgumentError(f"fraction must be in (0, 1], got {self.fraction}")

    def to_dict(self):
        d = asdict(self)
        d["drop"] = list(self.drop)
        d["split"] = list(self.split)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Preprocessor:
    """Everything needed to turn raw rows into standardised model input."""

    input_columns: list
    encoding: EncodingMap
    selected: list
    scaler: ScalerParams
    label_column: str = LABEL_COLUMN
    classes: tuple = CLASS_NAMES

    def transform(self, table: RawTable) -> np.ndarray:
        present = set(table.names) - {self.label_column}
        missing = sorted(set(self.input_columns) - present)
        if missing:
            raise CompatibilityError(f"input lacks columns {missing}; "
                                     f"extra columns: {sorted(present - set(self.input_columns))}")
        sub = table.select(self.input_columns)
        retyped = [n for n in self.encoding.categories if sub.kinds[n] == NUMERIC]
        if retyped:
            raise CompatibilityError(f"columns {retyped} were categorical at fit time; "
                                     f"load the CSV with Preprocessor.schema_hints()")
        encoded = apply_encoding(sub, self.encoding)
        pos = {n: i for i, n in enumerate(encoded.feature_names)}
        X = encoded.X[:, [pos[n] for n in self.selected]]
        return apply_scaler(self.scaler, X, self.selected)

    def schema_hints(self) -> dict:
        return {n: (CATEGORICAL if n in self.encoding.categories else NUMERIC)
                for n in self.input_columns}

    def to_dict(self):
        return {"input_columns": self.input_columns, "encoding": self.encoding.to_dict(),
                "selected": self.selected, "scaler": self.scaler.to_dict(),
                "label_column": self.label_column, "classes": list(self.classes)}

    @classmethod
    def from_dict(cls, d):
        return cls(list(d["input_columns"]), EncodingMap.from_dict(d["encoding"]),
                   list(d["selected"]), ScalerParams.from_dict(d["scaler"]),
                   d["label_column"], tuple(d["classes"]))


@dataclass
class PipelineResult:
    split: DatasetSplit
    preprocessor: Preprocessor
    ranking: list
    report: dict
    config: PipelineConfig
    seed: int


def encode_labels(values, classes=CLASS_NAMES) -> np.ndarray:
    index = class_index(classes)
    try:
        return np.fromiter((index[v] for v in values), dtype=np.int64, count=len(values))
    except KeyError as exc:
        raise IngestionError(f"unknown class label {exc.args[0]!r}; expected one of "
                             f"{list(classes)}") from exc


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def run_pipeline(source, config: PipelineConfig, seed: int) -> PipelineResult:
    """load, drop, dedup rows/columns, reduce, split, then fit encoding,
    chi-squared ranking and scaling on the training rows only."""
    warnings = []
    rng = Rng(seed).child("pipeline")
    if isinstance(source, RawTable):
        table = source
    else:
        table = _stage("load", load_csv, source, config.schema_hints, config.label_column)
    if config.label_column not in table.columns:
        raise StageError("load", IngestionError(f"label column {config.label_column!r} missing"))
    notes = dict(table.notes)
    rows_in = notes.get("rows_in", table.n_rows)
    all_columns = table.names

    table = _stage("drop_columns", drop_columns, table,
                   [c for c in config.drop if c != config.label_column], warnings)
    table, dup_rows = _stage("dedup_rows", dedup_rows, table)
    table, dup_cols = _stage("dedup_columns", dedup_columns, table, exclude=(config.label_column,))
    labels = _stage("labels", encode_labels, table.columns[config.label_column].tolist())
    if table.n_rows == 0:
        raise StageError("labels", ArgumentError("no labelled rows left after cleaning"))

    before_reduce = table.n_rows
    keep = _stage("reduce", stratified_indices, labels, config.fraction, rng.child("reduce"))
    table, labels = table.take(keep), labels[keep]
    parts = _stage("split", stratified_split_indices, labels, config.split,
                   rng.child("split"), warnings)
    train_idx = parts[0]

    features = table.select([n for n in table.names if n != config.label_column])
    train_table = features.take(train_idx)
    encoding = _stage("encode", fit_encoding, train_table, config.max_categories)
    encoded = _stage("encode", apply_encoding, features, encoding)
    ranking = _stage("chi2", chi2_rank, encoded.X[train_idx], labels[train_idx],
                     encoded.feature_names)
    selected = _stage("select", select_top_k, ranking, config.top_k, warnings)
    pos = {n: i for i, n in enumerate(encoded.feature_names)}
    X = encoded.X[:, [pos[n] for n in selected]]
    scaler = _stage("scale", fit_scaler, X[train_idx], selected)
    X = _stage("scale", apply_scaler, scaler, X, selected)

    splits = [Split(X[idx], labels[idx]) for idx in parts]
    split = DatasetSplit(*splits, feature_names=selected, classes=CLASS_NAMES)
    preprocessor = Preprocessor(features.names, encoding, selected, scaler,
                                config.label_column, CLASS_NAMES)
    report = {
        "rows_in": rows_in,
        "rows_out": int(sum(len(s) for s in splits)),
        "dropped_rows": {
            "unlabeled": notes.get("unlabeled_rows", 0),
            "duplicates": dup_rows,
            "reduction": before_reduce - len(keep),
        },
        "dropped_columns": {
            "configured": [c for c in config.drop if c in all_columns],
            "duplicate_content": dup_cols,
        },
        "imputations": notes.get("imputations", 0),
        "parse_failures": notes.get("parse_failures", {}),
        "partition_rows": {name: len(s) for name, s in zip(("train", "val", "test"), splits)},
        "warnings": warnings,
    }
    return PipelineResult(split, preprocessor, ranking, report, config, seed)


# -- binary matrix files ----------------------------------------------------

MATRIX_MAGIC = b"TCNM"
MATRIX_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def write_matrix(path, X) -> None:
    X = np.ascontiguousarray(X, dtype="<f8")
    if X.ndim == 1:
        X = X[:, None]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MATRIX_MAGIC, MATRIX_VERSION, X.shape[0], X.shape[1]))
        fh.write(X.tobytes())


def read_matrix(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CompatibilityError(f"{path} is too short to be a matrix file")
    magic, version, rows, cols = _HEADER.unpack_from(data)
    if magic != MATRIX_MAGIC:
        raise CompatibilityError(f"{path} is not a matrix file")
    if version != MATRIX_VERSION:
        raise CompatibilityError(f"{path} has matrix format version {version}, expected {MATRIX_VERSION}")
    body = data[_HEADER.size:]
    if len(body) != rows * cols * 8:
        raise CompatibilityError(f"{path} holds {len(body)} payload bytes, header says {rows}x{cols}")
    return np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(rows, cols)


PARTS = ("train", "val", "test")


def save_split(result: PipelineResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digest = hashlib.sha256()
    for name in PARTS:
        part = result.split.partition(name)
        write_matrix(out / f"{name}_X.bin", part.X)
        write_matrix(out / f"{name}_y.bin", part.y.astype(np.float64))
        for suffix in ("X", "y"):
            digest.update((out / f"{name}_{suffix}.bin").read_bytes())
    sidecar = {
        "format_version": 1,
        "feature_names": result.split.feature_names,
        "classes": list(result.split.classes),
        "preprocessor": result.preprocessor.to_dict(),
        "chi2_ranking": [[n, s] for n, s in result.ranking],
        "config": result.config.to_dict(),
        "config_hash": result.config.digest(),
        "seed": result.seed,
        "dataset_hash": digest.hexdigest()[:16],
    }
    (out / "sidecar.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    (out / "cleaning_report.json").write_text(json.dumps(result.report, indent=2, sort_keys=True) + "\n")
    return out


@dataclass
class LoadedSplit:
    split: DatasetSplit
    sidecar: dict

    @property
    def preprocessor(self) -> Preprocessor:
        return Preprocessor.from_dict(self.sidecar["preprocessor"])


def load_split(path) -> LoadedSplit:
    path = Path(path)
    sidecar_path = path / "sidecar.json"
    if not sidecar_path.exists():
        raise CompatibilityError(f"{path} has no sidecar.json; run preprocess first")
    sidecar = json.loads(sidecar_path.read_text())
    if sidecar.get("format_version") != 1:
        raise CompatibilityError(f"unsupported split format_version {sidecar.get('format_version')!r}")
    parts = []
    n_features = len(sidecar["feature_names"])
    for name in PARTS:
        X = read_matrix(path / f"{name}_X.bin")
        y = read_matrix(path / f"{name}_y.bin")[:, 0].astype(np.int64)
        if X.shape[1] != n_features and X.shape[0] > 0:
            raise CompatibilityError(f"{name} matrix has {X.shape[1]} columns, sidecar lists {n_features}")
        parts.append(Split(X.reshape(-1, n_features), y))
    split = DatasetSplit(*parts, feature_names=sidecar["feature_names"],
                         classes=tuple(sidecar["classes"]))
    return LoadedSplit(split, sidecar)
