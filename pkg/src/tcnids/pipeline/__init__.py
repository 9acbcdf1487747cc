from .chi2 import chi2_rank, chi2_scores, select_top_k
from .driver import (
    DEFAULT_DROP,
    PipelineConfig,
    PipelineResult,
    Preprocessor,
    load_split,
    read_matrix,
    run_pipeline,
    save_split,
    write_matrix,
)
from .encode import EncodedMatrix, EncodingMap, apply_encoding, encode_categoricals, fit_encoding
from .fixture import CLASS_COUNTS, CLASS_NAMES, REPORT_ORDER, generate_fixture, write_fixture_csv
from .scaler import ScalerParams, apply_scaler, fit_scaler
from .split import (
    DatasetSplit,
    largest_remainder,
    sample_counts,
    stratified_indices,
    stratified_sample,
    stratified_split,
    stratified_split_indices,
)
from .table import RawTable, dedup_columns, dedup_rows, drop_columns, load_csv
