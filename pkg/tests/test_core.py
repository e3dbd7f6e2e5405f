import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from synthod.core import (DataError, LabeledDataset, SeedPath, ceil_frac, pad_and_rescale,
                          read_dataset, read_labeled_csv, write_dataset)
from synthod.priors import draw_dataset

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def test_seed_paths_are_independent_and_repeatable():
    a = SeedPath(7).child("inliers").rng().random(5)
    b = SeedPath(7).child("inliers").rng().random(5)
    c = SeedPath(7).child("outliers").rng().random(5)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)
    assert SeedPath(7, (1, 2)) == SeedPath(7).child(1, 2)


def test_seed_path_rejects_negative():
    with pytest.raises(ValueError):
        SeedPath(1).child(-1)


def test_pad_identity():
    x = np.arange(100.0)
    assert np.array_equal(pad_and_rescale(x, 100), x)


def test_pad_half_width():
    out = pad_and_rescale(np.ones(50), 100)
    assert np.all(out[:50] == 2.0) and np.all(out[50:] == 0.0)


def test_pad_subsample_keeps_entries():
    x = np.arange(150.0)
    out = pad_and_rescale(x, 100, seed=3)
    assert out.shape == (100,)
    assert len(set(out)) == 100 and set(out) <= set(x)


def test_pad_rejects_nan():
    with pytest.raises(DataError):
        pad_and_rescale(np.array([1.0, np.nan]), 4)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 99).flatmap(lambda d: arrays(float, d, elements=finite)))
def test_pad_norm_factor(x):
    D = 100
    d = len(x)
    out = pad_and_rescale(x, D)
    assert np.isclose(np.sum(out**2), (D / d) ** 2 * np.sum(x**2), rtol=1e-12, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(101, 300), st.integers(0, 2**32))
def test_pad_wide_matrix_uses_one_subset(d, s):
    X = np.tile(np.arange(d, dtype=float), (3, 1))
    out = pad_and_rescale(X, 100, seed=s)
    assert out.shape == (3, 100)
    assert np.array_equal(out[0], out[2])


def test_ceil_frac():
    assert ceil_frac(0.3, 10) == 3
    assert ceil_frac(0.31, 10) == 4
    assert ceil_frac(1e-9, 10) == 1


def test_roundtrip_minimal(tmp_path):
    ds = LabeledDataset(np.zeros((1, 1)), np.zeros(1))
    write_dataset(ds, tmp_path / "a.csv")
    back = read_dataset(tmp_path / "a.csv")
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.labels, ds.labels)


def test_roundtrip_generated(tmp_path):
    ds = draw_dataset("gmm", SeedPath(3), n_in=50, d=3)
    write_dataset(ds, tmp_path / "g.csv")
    back = read_dataset(tmp_path / "g.csv")
    assert np.array_equal(back.labels, ds.labels)
    assert np.array_equal(back.features, ds.features)  # 17 digits is lossless for float64
    assert back.meta == json.loads(json.dumps(back.meta))
    assert back.meta["hyper"]["nll_threshold"] == ds.meta["hyper"]["nll_threshold"]


def test_unknown_label_token(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("f0,is_outlier\n1.0,2\n")
    with pytest.raises(DataError, match="unknown label token"):
        read_dataset(p)


def test_ragged_row(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("f0,f1,is_outlier\n1.0,0\n")
    with pytest.raises(DataError, match="inconsistent row width"):
        read_dataset(p)


def test_external_csv_drops_text_columns(tmp_path):
    p = tmp_path / "ext.csv"
    p.write_text("a,name,b,label\n1,x,2,0\n3,y,4,1\n")
    ds = read_labeled_csv(p)
    assert ds.features.tolist() == [[1.0, 2.0], [3.0, 4.0]]
    assert ds.labels.tolist() == [0, 1]


def test_split_context_is_inductive():
    ds = LabeledDataset(np.arange(20.0).reshape(10, 2), [0] * 8 + [1] * 2)
    ctx, qry, y = ds.split_context(SeedPath(1), 0.5)
    assert len(ctx) == 4 and len(qry) == 6 and y.sum() == 2
    ci, qi = ds.split_indices(SeedPath(1), 0.5)
    assert not set(ci) & set(qi)
    assert np.all(ds.labels[ci] == 0)
