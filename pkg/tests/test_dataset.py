import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from greedy_alr.dataset import (
    CATEGORICAL,
    NUMERIC,
    ColumnSpec,
    DatasetError,
    PoolSpec,
    budget_k,
    drowsiness_index,
    encode_and_normalize,
    load_csv,
    load_dataset,
    one_hot,
    raw_table_from_arrays,
    split_pool,
    zscore,
)

from support import DATA_DIR


def write(path, text):
    path.write_text(text)
    return path


def test_load_small_file(tmp_path):
    p = write(tmp_path / "t.csv", "a,b,y\n1,2,3\n4,5,6\n7,8,9\n")
    t = load_csv(p, ColumnSpec(label="y"))
    assert t.n_rows == 3
    assert t.names == ["a", "b"]
    assert t.rows[2] == [7.0, 8.0]
    np.testing.assert_array_equal(t.labels, [3, 6, 9])


def cps_like_csv(tmp_path, n=40, seed=0):
    # 8 numeric and 3 categorical raw features with 6, 3 and 2 levels
    rng = np.random.default_rng(seed)
    header = [f"num{j}" for j in range(8)] + ["occupation", "sector", "married", "wage"]
    lines = [",".join(header)]
    for i in range(n):
        nums = [f"{v:.3f}" for v in rng.normal(size=8)]
        cats = [f"occ{i % 6}", ["manuf", "constr", "other"][i % 3], ["yes", "no"][i % 2]]
        lines.append(",".join(nums + cats + [f"{rng.normal():.3f}"]))
    return write(tmp_path / "cps.csv", "\n".join(lines) + "\n")


def test_cps_shaped_table_counts(tmp_path):
    spec = ColumnSpec(label="wage", categorical=("occupation", "sector", "married"))
    t = load_csv(cps_like_csv(tmp_path), spec)
    assert len(t.names) == 11
    assert (t.n_numeric, t.n_categorical) == (8, 3)
    ds = encode_and_normalize(t)
    assert ds.n_features == 19
    assert len(ds.encoding_map) == 11
    assert ds.encoding_map[("sector", "constr")] == ds.feature_names.index("sector=constr")


def test_ragged_row_reports_index(tmp_path):
    p = write(tmp_path / "r.csv", "a,b,y\n1,2,3\n1,2,3,4\n5,6,7\n")
    with pytest.raises(DatasetError, match="row 1"):
        load_csv(p, ColumnSpec(label="y"))


def test_bad_inputs(tmp_path):
    with pytest.raises(DatasetError, match="no such file"):
        load_csv(tmp_path / "nope.csv", ColumnSpec(label="y"))
    p = write(tmp_path / "l.csv", "a,y\n1,2\n3,high\n")
    with pytest.raises(DatasetError, match="row 1.*'y'"):
        load_csv(p, ColumnSpec(label="y"))
    p = write(tmp_path / "m.csv", "a,y\n1,2\n?,3\n")
    with pytest.raises(DatasetError, match="missing"):
        load_csv(p, ColumnSpec(label="y"))
    p = write(tmp_path / "n.csv", "a,y\n1,2\nabc,3\n")
    with pytest.raises(DatasetError, match="row 1, column 'a'"):
        load_csv(p, ColumnSpec(label="y"))
    with pytest.raises(DatasetError, match="must be numeric"):
        load_csv(p, ColumnSpec(label="y", categorical=("y",)))


def test_numeric_table_is_standardized():
    rng = np.random.default_rng(1)
    cols = [rng.normal(loc=10 * j, scale=j + 1, size=50) for j in range(7)]
    ds = encode_and_normalize(raw_table_from_arrays(cols, [NUMERIC] * 7, rng.normal(size=50)))
    assert ds.n_features == 7
    assert np.all(np.abs(ds.features.mean(axis=0)) <= 1e-9)
    assert np.all(np.abs(ds.features.std(axis=0) - 1) <= 1e-9)


def test_constant_columns_dropped():
    cols = [[1.0, 2.0, 3.0], [5.0, 5.0, 5.0], ["a", "a", "a"], ["p", "q", "p"]]
    t = raw_table_from_arrays(cols, [NUMERIC, NUMERIC, CATEGORICAL, CATEGORICAL], [0, 1, 2],
                              names=["x", "const", "cat1", "cat2"])
    ds = encode_and_normalize(t)
    assert ds.feature_names == ["x", "cat2=p", "cat2=q"]
    assert ds.dropped == ["const", "cat1=a"]
    assert ("cat1", "a") not in ds.encoding_map
    assert ds.encoding_map[("cat2", "q")] == 2


def test_too_few_rows():
    with pytest.raises(DatasetError):
        encode_and_normalize(raw_table_from_arrays([[1.0]], [NUMERIC], [1.0]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 4)), min_size=2, max_size=30))
def test_one_hot_rows_have_single_one(pairs):
    a = [str(p[0]) for p in pairs]
    b = [f"L{p[1]}" for p in pairs]
    t = raw_table_from_arrays([a, b], [CATEGORICAL, CATEGORICAL], [0.0] * len(pairs), ["a", "b"])
    X, names, enc = one_hot(t)
    for col in ("a", "b"):
        idx = [c for (src, _), c in enc.items() if src == col]
        np.testing.assert_array_equal(X[:, idx].sum(axis=1), 1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.integers(1, 6), st.integers(0, 10_000))
def test_normalization_idempotent(n, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d)) * rng.uniform(0.1, 100, size=d) + rng.normal(size=d) * 50
    Z, *_ = zscore(X)
    Z2, *_ = zscore(Z)
    assert Z2.shape == Z.shape
    np.testing.assert_allclose(Z2, Z, atol=1e-9, rtol=0)


def test_split_pool_sizes():
    pool, hold = split_pool(103, PoolSpec(seed=3), k0=7)
    assert len(pool) == math.floor(0.8 * 103) == 82
    assert len(set(pool)) == 82
    assert sorted(set(pool) | set(hold)) == list(range(103))
    pool, hold = split_pool(50, PoolSpec(pool_fraction=1.0, seed=3), k0=7)
    np.testing.assert_array_equal(pool, np.arange(50))
    assert hold.size == 0
    # 0.29 * 100 is 28.999... in binary floating point
    pool, _ = split_pool(100, PoolSpec(pool_fraction=0.29), k0=1)
    assert len(pool) == 29


def test_split_pool_determinism():
    a, _ = split_pool(60, PoolSpec(seed=11), k0=5)
    b, _ = split_pool(60, PoolSpec(seed=11), k0=5)
    np.testing.assert_array_equal(a, b)
    c, _ = split_pool(60, PoolSpec(seed=12), k0=5)
    assert not np.array_equal(a, c)


def test_split_pool_too_small():
    with pytest.raises(DatasetError, match="K0"):
        split_pool(10, PoolSpec(pool_fraction=0.5), k0=5)


def test_pool_spec_validation():
    with pytest.raises(DatasetError):
        PoolSpec(pool_fraction=0.0)
    with pytest.raises(DatasetError):
        PoolSpec(k_min=70, k_max=60)


@pytest.mark.parametrize("n, k", [(103, 21), (4898, 60), (50, 20), (308, 60), (392, 60), (1030, 60)])
def test_budget_k(n, k):
    assert budget_k(n, PoolSpec()) == k


def test_budget_k_rounds_half_up():
    assert budget_k(5, PoolSpec(k_fraction=0.5, k_min=1, k_max=10)) == 3
    assert budget_k(125, PoolSpec(k_fraction=0.2, k_min=1, k_max=100)) == 25
    assert budget_k(1, PoolSpec()) == 20


def test_drowsiness_index_values():
    assert drowsiness_index(1.0, 1.0) == 0.0
    assert drowsiness_index(100.0, 1.0) >= 0.999
    assert drowsiness_index(0.2, 1.0) == 0.0
    # direct evaluation of the logistic-ratio form
    expected = (1 - math.exp(-1.0)) / (1 + math.exp(-1.0))
    assert drowsiness_index(2.0, 1.0) == pytest.approx(expected, abs=1e-12)
    assert drowsiness_index(2.0, 1.0) == pytest.approx(0.46212, abs=1e-5)
    np.testing.assert_allclose(drowsiness_index(np.array([1.0, 2.0]), 1.0), [0.0, expected])


@settings(max_examples=100, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50))
def test_drowsiness_index_monotone_bounded(a, b):
    lo, hi = min(a, b), max(a, b)
    ya, yb = drowsiness_index(lo, 1.0), drowsiness_index(hi, 1.0)
    assert 0.0 <= ya <= yb <= 1.0


def test_column_spec_json(tmp_path):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps({"label": "y", "categorical": ["c"], "exclude": ["id"]}))
    spec = ColumnSpec.from_json(p)
    assert spec == ColumnSpec("y", ("c",), ("id",))
    with pytest.raises(DatasetError):
        ColumnSpec.from_dict({"categorical": []})


def test_dataset_dump_roundtrip(tmp_path):
    p = write(tmp_path / "t.csv", "a,b,y\n1,2,3\n4,0,6\n7,8,9\n")
    ds = load_dataset(p, ColumnSpec(label="y"))
    ds.to_csv(tmp_path / "out.csv")
    back = np.loadtxt(tmp_path / "out.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(back[:, :2], ds.features)
    np.testing.assert_array_equal(back[:, 2], ds.labels)


def test_bundled_autompg_matches_table_shape():
    ds = load_dataset(DATA_DIR / "autompg.csv", DATA_DIR / "autompg.json")
    assert ds.n_samples == 392
    assert ds.n_features == 9   # 6 numeric + 3 origin levels
    assert [n for n in ds.feature_names if n.startswith("origin=")] == ["origin=1", "origin=2", "origin=3"]


def test_bundled_concrete_matches_table_shape():
    ds = load_dataset(DATA_DIR / "concrete.csv", DATA_DIR / "concrete.json")
    assert (ds.n_samples, ds.n_features) == (1030, 8)
