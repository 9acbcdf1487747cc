
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcnids.errors import ArgumentError, CompatibilityError, IngestionError, StageError
from tcnids.numerics import Rng
from tcnids.pipeline import chi2, driver, encode, fixture, scaler, split, table
from tcnids.pipeline.table import CATEGORICAL, NUMERIC, RawTable


def _csv(tmp_path, text, name="in.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


# -- load_csv ---------------------------------------------------------------

def test_load_toy(tmp_path):
    t = table.load_csv(_csv(tmp_path, "x,s,Attack_type\n1,a,Normal\n2.5,b,XSS\n3,a,MITM\n"))
    assert t.n_rows == 3
    assert t.kinds == {"x": NUMERIC, "s": CATEGORICAL, "Attack_type": CATEGORICAL}
    assert t.columns["x"].tolist() == [1.0, 2.5, 3.0]


def test_load_nan_imputed(tmp_path):
    t = table.load_csv(_csv(tmp_path, "x,Attack_type\nNaN,Normal\n4,XSS\n"))
    assert t.columns["x"].tolist() == [0.0, 4.0]
    assert t.notes["imputations"] == 1


def test_load_header_only(tmp_path):
    t = table.load_csv(_csv(tmp_path, "x,Attack_type\n"))
    assert t.n_rows == 0 and t.names == ["x", "Attack_type"]


def test_load_unlabeled_rows_dropped(tmp_path):
    t = table.load_csv(_csv(tmp_path, "x,Attack_type\n1,Normal\n2,\n"))
    assert t.n_rows == 1 and t.notes["unlabeled_rows"] == 1


def test_load_quoted_fields(tmp_path):
    t = table.load_csv(_csv(tmp_path, 'x,s,Attack_type\n1,"a,b",Normal\n'))
    assert t.columns["s"].tolist() == ["a,b"]


def test_load_missing_label(tmp_path):
    with pytest.raises(IngestionError, match="Attack_type"):
        table.load_csv(_csv(tmp_path, "x\n1\n"))


def test_load_missing_file(tmp_path):
    with pytest.raises(IngestionError):
        table.load_csv(tmp_path / "nope.csv")


def test_schema_hint_forces_numeric(tmp_path):
    t = table.load_csv(_csv(tmp_path, "x,Attack_type\n1,Normal\nzz,XSS\n"), {"x": NUMERIC})
    assert t.columns["x"].tolist() == [1.0, 0.0]
    assert t.notes["parse_failures"] == {"x": 1}


# -- drop / dedup -----------------------------------------------------------

def _tbl(**cols):
    kinds = {k: (CATEGORICAL if np.asarray(v).dtype == object else NUMERIC) for k, v in cols.items()}
    return RawTable({k: np.asarray(v) for k, v in cols.items()}, kinds)


def test_drop_one():
    t = table.drop_columns(_tbl(a=[1.0], b=[2.0], c=[3.0]), ["b"])
    assert t.names == ["a", "c"]


def test_drop_missing_name_warns():
    warnings = []
    t = table.drop_columns(_tbl(a=[1.0]), ["zz"], warnings)
    assert t.names == ["a"] and "zz" in warnings[0]


def test_default_drop_list():
    for name in ("frame.time", "ip.src_host", "ip.dst_host", "icmp.unused"):
        assert name in driver.DEFAULT_DROP


def test_dedup_rows_pair():
    t, removed = table.dedup_rows(_tbl(a=[1.0, 1.0, 2.0], b=np.array(["x", "x", "x"], dtype=object)))
    assert removed == 1 and t.columns["a"].tolist() == [1.0, 2.0]


def test_dedup_rows_distinct():
    t, removed = table.dedup_rows(_tbl(a=[1.0, 2.0]))
    assert removed == 0 and t.n_rows == 2


def test_dedup_rows_oracle():
    rng = np.random.default_rng(0)
    a = rng.integers(0, 4, 1000).astype(float)
    b = np.array([f"v{v}" for v in rng.integers(0, 3, 1000)], dtype=object)
    c = rng.integers(0, 5, 1000).astype(float)
    out, removed = table.dedup_rows(_tbl(a=a, b=b, c=c))
    seen, first = set(), []
    for i, row in enumerate(zip(a.tolist(), b.tolist(), c.tolist())):
        if row not in seen:
            seen.add(row)
            first.append(i)
    assert out.n_rows == len(seen) and removed == 1000 - len(seen)
    assert out.columns["c"].tolist() == c[first].tolist()


def test_dedup_columns_copy():
    t, dropped = table.dedup_columns(_tbl(a=[1.0, 2.0], b=[3.0, 4.0], a2=[1.0, 2.0]))
    assert t.names == ["a", "b"] and dropped == ["a2"]


def test_dedup_columns_one_value_differs():
    t, dropped = table.dedup_columns(_tbl(a=[1.0, 2.0], b=[1.0, 3.0]))
    assert t.names == ["a", "b"] and dropped == []


def _pairwise_oracle(t):
    keep = []
    for name in t.names:
        if not any(t.kinds[k] == t.kinds[name] and np.array_equal(t.columns[k], t.columns[name])
                   for k in keep):
            keep.append(name)
    return keep


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("collide", [False, True])
def test_dedup_columns_oracle(seed, collide):
    rng = np.random.default_rng(seed)
    base = [rng.integers(0, 2, 6).astype(float) for _ in range(5)]
    cols = {f"c{i}": base[rng.integers(5)].copy() for i in range(20)}
    t = _tbl(**cols)
    hasher = (lambda values: "same") if collide else table.column_digest
    out, _ = table.dedup_columns(t, hasher=hasher)
    assert out.names == _pairwise_oracle(t)


# -- encoding ---------------------------------------------------------------

def test_encoding_two_categories():
    m, enc = encode.encode_categoricals(_tbl(col=np.array(["a", "b", "a"], dtype=object)))
    assert m.feature_names == ["col_0", "col_1", "col_rare"]
    assert m.X[:, :2].tolist() == [[1, 0], [0, 1], [1, 0]]
    assert not m.X[:, 2].any()


def test_encoding_rows_sum_to_one():
    values = np.array([f"v{i % 7}" for i in range(50)], dtype=object)
    m, _ = encode.encode_categoricals(_tbl(col=values, x=np.arange(50.0)), max_categories=3)
    assert m.X.shape[1] == 4 + 1
    assert np.all(m.X[:, :4].sum(axis=1) == 1)
    assert m.X[:, 4].tolist() == list(range(50))


def test_encoding_unseen_goes_rare():
    enc = encode.fit_encoding(_tbl(col=np.array(["a", "b"], dtype=object)))
    m = encode.apply_encoding(_tbl(col=np.array(["zzz"], dtype=object)), enc)
    assert m.X.tolist() == [[0, 0, 1]]


def test_encoding_empty_column():
    m, _ = encode.encode_categoricals(_tbl(col=np.array([], dtype=object)))
    assert m.feature_names == ["col_rare"] and m.X.shape == (0, 1)


def test_encoding_bad_max():
    with pytest.raises(ArgumentError):
        encode.fit_encoding(_tbl(col=np.array(["a"], dtype=object)), 1)


# -- chi-squared ------------------------------------------------------------

def _chi2_oracle(X, y):
    n = len(y)
    out = []
    for f in range(X.shape[1]):
        total = sum(X[i, f] for i in range(n))
        stat = 0.0
        for c in sorted(set(y.tolist())):
            members = [i for i in range(n) if y[i] == c]
            observed = sum(X[i, f] for i in members)
            expected = len(members) / n * total
            if expected > 0:
                stat += (observed - expected) ** 2 / expected
        out.append(stat)
    return np.array(out)


def test_chi2_hand_example():
    assert chi2.chi2_scores(np.array([[2.0], [0.0]]), np.array([0, 1])).tolist() == [2.0]


def test_chi2_constant_feature():
    y = np.random.default_rng(0).integers(0, 4, 37)
    assert chi2.chi2_scores(np.ones((37, 1)), y).tolist() == [0.0]


@pytest.mark.parametrize("seed", range(10))
def test_chi2_oracle(seed):
    rng = np.random.default_rng(seed)
    X = rng.exponential(size=(50, 8))
    y = rng.integers(0, 3, 50)
    assert np.allclose(chi2.chi2_scores(X, y), _chi2_oracle(X, y), rtol=0, atol=1e-9)


def test_chi2_rank_order_and_ties():
    X = np.array([[2.0, 1.0, 2.0], [0.0, 1.0, 0.0]])
    ranking = chi2.chi2_rank(X, np.array([0, 1]), ["b", "const", "a"])
    assert [n for n, _ in ranking] == ["a", "b", "const"]
    assert chi2.select_top_k(ranking, 2) == ["a", "b"]


def test_chi2_negative_rejected():
    with pytest.raises(ArgumentError, match="neg"):
        chi2.chi2_rank(np.array([[1.0, -1.0]]), np.array([0]), ["ok", "neg"])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_chi2_row_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    X = rng.exponential(size=(30, 4)) * 10.0 ** rng.integers(-3, 4, size=4)
    y = rng.integers(0, 4, 30)
    p = rng.permutation(30)
    assert chi2.chi2_scores(X, y).tolist() == chi2.chi2_scores(X[p], y[p]).tolist()


def test_select_top_k_edges():
    ranking = [("a", 3.0), ("b", 2.0)]
    assert chi2.select_top_k(ranking, 0) == []
    assert chi2.select_top_k(ranking, 2) == ["a", "b"]
    warnings = []
    assert chi2.select_top_k(ranking, 5, warnings) == ["a", "b"] and warnings


# -- stratification ---------------------------------------------------------

def test_sample_counts_example():
    assert split.sample_counts({0: 100, 1: 20}, 0.25) == {0: 25, 1: 5}
    assert split.sample_counts({0: 1}, 0.25) == {0: 1}


def test_sample_fraction_one_identity():
    labels = np.array([0, 1, 1, 2])
    assert split.stratified_indices(labels, 1.0, Rng(0)).tolist() == [0, 1, 2, 3]


@pytest.mark.parametrize("fraction", [0.0, 1.5])
def test_sample_bad_fraction(fraction):
    with pytest.raises(ArgumentError):
        split.stratified_indices(np.array([0]), fraction, Rng(0))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 400), min_size=1, max_size=15), st.integers(0, 1000))
def test_sample_preserves_proportions(counts, seed):
    labels = np.repeat(np.arange(len(counts)), counts)
    idx = split.stratified_indices(labels, 0.25, Rng(seed))
    kept = np.bincount(labels[idx], minlength=len(counts))
    assert np.all(np.abs(kept - 0.25 * np.array(counts)) <= 1)
    assert len(set(idx.tolist())) == len(idx)


def test_split_ten_rows():
    parts = split.stratified_split_indices(np.zeros(10, dtype=int), (0.7, 0.1, 0.2), Rng(0))
    assert [len(p) for p in parts] == [7, 1, 2]


def test_largest_remainder_normal_class():
    assert split.largest_remainder(349_906, (0.7, 0.1, 0.2))[2] == 69_981


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 300), min_size=1, max_size=15), st.integers(0, 1000))
def test_split_partition_property(counts, seed):
    labels = np.repeat(np.arange(len(counts)), counts)
    parts = split.stratified_split_indices(labels, (0.7, 0.1, 0.2), Rng(seed))
    joined = np.concatenate(parts)
    assert sorted(joined.tolist()) == list(range(len(labels)))
    for p, frac in zip(parts, (0.7, 0.1, 0.2)):
        got = np.bincount(labels[p], minlength=len(counts))
        small = np.array(counts) < 3
        assert np.all((np.abs(got - frac * np.array(counts)) <= 1) | small)


def test_split_tiny_class_goes_to_train():
    warnings = []
    parts = split.stratified_split_indices(np.array([0, 0, 0, 0, 0, 1]), (0.7, 0.1, 0.2),
                                           Rng(0), warnings)
    assert 5 in parts[0].tolist() and warnings


def test_split_bad_fractions():
    with pytest.raises(ArgumentError):
        split.stratified_split_indices(np.zeros(4), (0.5, 0.4), Rng(0))


# -- scaler -----------------------------------------------------------------

def test_scaler_hand():
    params = scaler.fit_scaler(np.array([[0.0], [2.0]]))
    assert params.mean.tolist() == [1.0] and params.std.tolist() == [1.0]
    assert scaler.apply_scaler(params, np.array([[0.0], [2.0]])).ravel().tolist() == [-1.0, 1.0]


def test_scaler_constant():
    params = scaler.fit_scaler(np.full((3, 1), 5.0))
    assert params.constant.tolist() == [True]
    assert not scaler.apply_scaler(params, np.array([[1.0], [9.0]])).any()


def test_scaler_standardises(nprng):
    X = nprng.normal(3.0, 7.0, size=(200, 5))
    out = scaler.apply_scaler(scaler.fit_scaler(X), X)
    assert np.all(np.abs(out.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(out.std(axis=0) - 1) < 1e-9)


def test_scaler_name_mismatch():
    params = scaler.fit_scaler(np.ones((2, 2)), ["a", "b"])
    with pytest.raises(ArgumentError):
        scaler.apply_scaler(params, np.ones((2, 2)), ["b", "a"])


# -- fixture ----------------------------------------------------------------

def _centroid_accuracy(table_, labels, train_frac=0.5):
    X = np.column_stack([table_.columns[n] for n in table_.names if table_.kinds[n] == NUMERIC])
    n = len(labels) // 2
    centres = np.array([X[:n][labels[:n] == c].mean(axis=0) for c in range(15)])
    d = ((X[n:, None, :] - centres[None]) ** 2).sum(axis=2)
    return np.mean(np.argmin(d, axis=1) == labels[n:])


def test_fixture_nearest_centroid():
    t, labels = fixture.generate_fixture(rng=Rng(0))
    assert t.n_rows == 4500 and len(t.names) == 36
    assert _centroid_accuracy(t, labels) >= 0.95


def test_fixture_no_signal():
    t, labels = fixture.generate_fixture(separation=0.0, rng=Rng(0))
    assert abs(_centroid_accuracy(t, labels) - 1 / 15) <= 0.05


def test_fixture_deterministic_bytes(tmp_path):
    paths = []
    for i in range(2):
        t, labels = fixture.generate_fixture(per_class=20, rng=Rng(9))
        paths.append(tmp_path / f"f{i}.csv")
        fixture.write_fixture_csv(paths[-1], t, labels)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_fixture_non_negative():
    t, _ = fixture.generate_fixture(per_class=10, rng=Rng(2))
    assert all(t.columns[n].min() >= 0 for n in t.names if t.kinds[n] == NUMERIC)


def test_fixture_bad_per_class():
    with pytest.raises(ArgumentError):
        fixture.generate_fixture(per_class=0)


# -- driver -----------------------------------------------------------------

@pytest.fixture(scope="module")
def fixture_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("fx") / "fixture.csv"
    t, labels = fixture.generate_fixture(per_class=40, numeric_features=6, categorical_features=2,
                                         rng=Rng(1))
    fixture.write_fixture_csv(path, t, labels)
    return path


def test_pipeline_deterministic(tmp_path, fixture_csv):
    outs = []
    for i in range(2):
        result = driver.run_pipeline(fixture_csv, driver.PipelineConfig(), seed=3)
        outs.append(driver.save_split(result, tmp_path / str(i)))
    for f in sorted(p.name for p in outs[0].iterdir()):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f


def test_pipeline_report_and_round_trip(tmp_path, fixture_csv):
    result = driver.run_pipeline(fixture_csv, driver.PipelineConfig(), seed=0)
    r = result.report
    assert r["rows_in"] == 600 and r["dropped_rows"]["reduction"] == 450
    assert sum(r["partition_rows"].values()) == r["rows_out"] == 150
    loaded = driver.load_split(driver.save_split(result, tmp_path))
    for name in driver.PARTS:
        a, b = loaded.split.partition(name), result.split.partition(name)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert loaded.sidecar["config_hash"] == result.config.digest()


def test_pipeline_train_stats(fixture_csv):
    result = driver.run_pipeline(fixture_csv, driver.PipelineConfig(fraction=1.0), seed=0)
    X = result.split.train.X
    live = X.std(axis=0) > 0
    assert np.all(np.abs(X.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(X.std(axis=0)[live] - 1) < 1e-9)


def test_no_leak_guard():
    # the stored scaler must equal a train-rows-only refit, not a full-data fit
    t, labels = fixture.generate_fixture(classes=3, per_class=30, numeric_features=2,
                                         categorical_features=1, rng=Rng(0))
    t.columns["Attack_type"] = np.array([fixture.CLASS_NAMES[c] for c in labels], dtype=object)
    t.kinds["Attack_type"] = CATEGORICAL
    cfg = driver.PipelineConfig(fraction=1.0)
    result = driver.run_pipeline(t, cfg, seed=0)
    parts = split.stratified_split_indices(labels, cfg.split, Rng(0).child("pipeline").child("split"))
    pre = result.preprocessor
    features = t.select([n for n in t.names if n != "Attack_type"])
    enc = encode.apply_encoding(features, pre.encoding)
    pos = {n: i for i, n in enumerate(enc.feature_names)}
    X = enc.X[:, [pos[n] for n in pre.selected]]
    train_fit = scaler.fit_scaler(X[parts[0]])
    full_fit = scaler.fit_scaler(X)
    assert np.array_equal(pre.scaler.mean, train_fit.mean)
    assert not np.allclose(pre.scaler.mean, full_fit.mean)


def test_pipeline_stage_error(tmp_path):
    path = _csv(tmp_path, "x,Attack_type\n1,NotAClass\n")
    with pytest.raises(StageError, match=r"\[labels\]"):
        driver.run_pipeline(path, driver.PipelineConfig(), seed=0)


def test_matrix_file_errors(tmp_path):
    path = tmp_path / "m.bin"
    driver.write_matrix(path, np.arange(6.0).reshape(2, 3))
    assert driver.read_matrix(path).tolist() == [[0, 1, 2], [3, 4, 5]]
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(CompatibilityError):
        driver.read_matrix(path)
    path.write_bytes(b"XXXX" + data[4:])
    with pytest.raises(CompatibilityError):
        driver.read_matrix(path)
