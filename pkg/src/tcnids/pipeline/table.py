"""Named-column tables, CSV ingestion and row/column de-duplication."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..errors import IngestionError

log = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
MISSING_MARKERS = frozenset({"", "nan", "NaN", "NAN", "NA", "N/A", "null", "NULL", "None"})
LABEL_COLUMN = "Attack_type"


@dataclass
class RawTable:
    """Ordered named columns: float64 arrays (numeric) or object arrays of str."""

    columns: dict
    kinds: dict
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"columns have unequal lengths {sorted(lengths)}")
        if list(self.columns) != list(self.kinds):
            raise ValueError("kinds must name exactly the table's columns, in order")

    @property
    def names(self):
        return list(self.columns)

    @property
    def n_rows(self):
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def take(self, idx) -> "RawTable":
        idx = np.asarray(idx, dtype=np.int64)
        return RawTable({k: v[idx] for k, v in self.columns.items()}, dict(self.kinds),
                        dict(self.notes))

    def select(self, names) -> "RawTable":
        return RawTable({k: self.columns[k] for k in names},
                        {k: self.kinds[k] for k in names}, dict(self.notes))


def _is_missing(values: np.ndarray) -> np.ndarray:
    return np.isin(values, list(MISSING_MARKERS))


def load_csv(path, schema_hints=None, label_column=LABEL_COLUMN) -> RawTable:
    """Read a headed CSV into typed columns.

    A column is numeric when every non-missing value parses as a number, or
    when ``schema_hints`` says so. Missing numeric cells (and, for hinted
    columns, unparseable ones) become 0. Rows with an empty label are
    dropped. Counts are left in ``table.notes``.
    """
    schema_hints = dict(schema_hints or {})
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False,
                         encoding="utf-8", skipinitialspace=False)
    except FileNotFoundError as exc:
        raise IngestionError(f"cannot read {path}: file not found") from exc
    except pd.errors.EmptyDataError as exc:
        raise IngestionError(f"{path} has no header row") from exc
    except pd.errors.ParserError as exc:
        raise IngestionError(f"malformed CSV {path}: {exc}") from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestionError(f"cannot read {path}: {exc}") from exc
    if df.columns.duplicated().any():
        raise IngestionError(f"duplicate column names in {path}")
    if label_column is not None and label_column not in df.columns:
        raise IngestionError(f"label column {label_column!r} missing from {path}")
    return frame_to_table(df, schema_hints, label_column)


def frame_to_table(df: pd.DataFrame, schema_hints=None, label_column=LABEL_COLUMN) -> RawTable:
    schema_hints = dict(schema_hints or {})
    rows_in = len(df)
    if label_column is not None:
        labels = df[label_column].to_numpy(dtype=object)
        keep = ~_is_missing(labels)
        dropped = int((~keep).sum())
        if dropped:
            df = df.loc[keep]
    else:
        dropped = 0

    columns, kinds = {}, {}
    imputations = 0
    parse_failures = {}
    for name in df.columns:
        raw = df[name].to_numpy(dtype=object)
        if name == label_column:
            columns[name], kinds[name] = raw.astype(str).astype(object), CATEGORICAL
            continue
        missing = _is_missing(raw)
        parsed = pd.to_numeric(pd.Series(raw, dtype=object).where(~missing), errors="coerce")
        parsed = parsed.to_numpy(dtype=np.float64)
        failed = np.isnan(parsed) & ~missing
        hint = schema_hints.get(name)
        if hint == CATEGORICAL or (hint is None and failed.any()):
            columns[name], kinds[name] = raw.astype(str).astype(object), CATEGORICAL
            continue
        # inf counts as a parse failure: the table only stores finite numbers
        failed |= np.isinf(parsed)
        n_missing = int(missing.sum())
        if failed.any():
            parse_failures[name] = int(failed.sum())
        imputations += n_missing + int(failed.sum())
        parsed[missing | failed] = 0.0
        columns[name], kinds[name] = parsed, NUMERIC
    notes = {"rows_in": rows_in, "unlabeled_rows": dropped, "imputations": imputations,
             "parse_failures": parse_failures}
    return RawTable(columns, kinds, notes)


def drop_columns(table: RawTable, names, warnings=None) -> RawTable:
    """Remove ``names``; absent ones are skipped and reported in ``warnings``."""
    drop = set(names)
    for name in names:
        if name not in table.columns:
            message = f"drop_columns: column {name!r} not present"
            log.info(message)
            if warnings is not None:
                warnings.append(message)
    return table.select([n for n in table.names if n not in drop])


def _row_keys(table: RawTable) -> pd.DataFrame:
    return pd.DataFrame({k: v for k, v in table.columns.items()})


def dedup_rows(table: RawTable):
    """Drop exact duplicate rows, keeping first occurrences in order."""
    if table.n_rows == 0:
        return table, 0
    dup = _row_keys(table).duplicated(keep="first").to_numpy()
    return table.take(np.flatnonzero(~dup)), int(dup.sum())


def column_digest(values: np.ndarray) -> str:
    h = hashlib.sha256()
    if values.dtype == object:
        for v in values:
            b = str(v).encode("utf-8")
            h.update(len(b).to_bytes(8, "little"))
            h.update(b)
    else:
        h.update(np.ascontiguousarray(values, dtype="<f8").tobytes())
    return h.hexdigest()


def dedup_columns(table: RawTable, exclude=(), hasher=column_digest):
    """Drop columns whose content equals an earlier column's.

    Candidates are grouped by ``hasher``; a column is only dropped after a
    full comparison confirms the match, so digest collisions are harmless.
    """
    buckets = {}
    keep, dropped = [], []
    for name in table.names:
        if name in exclude:
            keep.append(name)
            continue
        values = table.columns[name]
        key = (table.kinds[name], hasher(values))
        match = next((other for other in buckets.get(key, [])
                      if np.array_equal(table.columns[other], values)), None)
        if match is None:
            buckets.setdefault(key, []).append(name)
            keep.append(name)
        else:
            dropped.append(name)
    return table.select(keep), dropped
