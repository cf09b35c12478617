import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mcgen.data import (
    CATEGORICAL,
    NUMERIC,
    ScaledTable,
    SplitSpec,
    Table,
    UnitScaler,
    decode_rows,
    inverse_scale,
    load_csv,
    one_hot_encode,
    scale_to_unit,
    split_by_label,
    split_train_seed,
    stratified_indices,
)
from mcgen.exceptions import MCGenWarning, ValidationError


def _table(columns, kinds, label_column=None):
    names = tuple(f"c{i}" for i in range(len(columns)))
    rows = tuple(zip(*columns))
    label_column = len(columns) - 1 if label_column is None else label_column
    return Table(names, tuple(kinds), rows, label_column)


def _scaled(values, labels):
    values = np.asarray(values, dtype=float)
    d = values.shape[1]
    return ScaledTable(tuple(f"f{i}" for i in range(d)), values, -np.ones(d), np.ones(d), labels)


class TestLoadCsv:
    def test_shape(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("a,b\n1,x\n2,y\n3,x\n")
        t = load_csv(p)
        assert (t.n, t.d) == (3, 2)

    def test_ragged_row_names_row(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("a,b,c\n1,2\n")
        with pytest.raises(ValidationError, match="row 2"):
            load_csv(p)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("")
        with pytest.raises(ValidationError, match="empty"):
            load_csv(p)

    def test_kind_inference(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("num,cat,y\n1,a,0\n2,b,1\n3,a,0\n")
        t = load_csv(p)
        assert t.column_kinds == (NUMERIC, CATEGORICAL, CATEGORICAL)

    def test_label_is_categorical_even_if_numeric(self, diabetes_path):
        t = load_csv(diabetes_path)
        assert t.label_name == "Outcome"
        assert t.column_kinds[t.label_column] == CATEGORICAL
        assert (t.n, t.d) == (768, 9)

    def test_label_by_name(self, small_csv):
        t = load_csv(small_csv, label="color")
        assert t.label_name == "color"

    def test_unknown_label(self, small_csv):
        with pytest.raises(ValidationError):
            load_csv(small_csv, label="nope")

    def test_declared_numeric_column_with_text(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("a,b\nfoo,x\n2,y\n")
        with pytest.raises(ValidationError, match="cannot parse"):
            load_csv(p, kinds={"a": NUMERIC})

    def test_non_finite_rejected(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("a,b\ninf,x\n2,y\n")
        with pytest.raises(ValidationError, match="finite"):
            load_csv(p)


class TestOneHot:
    def test_first_appearance_order(self):
        t = _table([["red", "blue", "red"], ["A", "B", "A"]], [CATEGORICAL, CATEGORICAL])
        e = one_hot_encode(t)
        assert e.column_names == ("c0=red", "c0=blue", "c1")
        assert [r[:2] for r in e.rows] == [(1.0, 0.0), (0.0, 1.0), (1.0, 0.0)]
        assert e.label_name == "c1"

    def test_numeric_only_is_identity(self):
        t = _table([[1.0, 2.0], [3.0, 4.0], ["a", "b"]], [NUMERIC, NUMERIC, CATEGORICAL])
        assert one_hot_encode(t) is t

    def test_rows_sum_to_one(self):
        vals = ["a", "b", "c", "a", "b"]
        t = _table([vals, ["y"] * 5], [CATEGORICAL, CATEGORICAL])
        e = one_hot_encode(t)
        assert e.d == 4
        assert all(sum(r[:3]) == 1.0 for r in e.rows)

    def test_single_value_warns(self):
        t = _table([["z", "z"], [1.0, 2.0], ["a", "b"]], [CATEGORICAL, NUMERIC, CATEGORICAL])
        with pytest.warns(MCGenWarning):
            e = one_hot_encode(t)
        assert e.column_names[0] == "c0=z"

    def test_decode_round_trip(self, small_csv):
        t = one_hot_encode(load_csv(small_csv))
        s = scale_to_unit(t)
        header, rows = decode_rows(s.inverse_values(), s.labels, s.encoding, s.feature_names, s.label_name)
        assert header == ["x", "color", "size", "label"]
        assert [r[1] for r in rows] == ["red", "blue", "red", "green"]
        assert np.allclose([r[0] for r in rows], [1.5, 2.0, -1, 4])


class TestScale:
    def test_endpoints_and_midpoint(self):
        t = _table([[0.0, 5.0, 10.0], [1.0, 2.0, 3.0], ["a", "b", "a"]], [NUMERIC, NUMERIC, CATEGORICAL])
        s = scale_to_unit(t)
        assert np.array_equal(s.values[:, 0], [-1.0, 0.0, 1.0])

    def test_identity_on_unit_range(self):
        t = _table([[-1.0, 1.0], [1.0, -1.0], ["a", "b"]], [NUMERIC, NUMERIC, CATEGORICAL])
        assert np.array_equal(scale_to_unit(t).values[:, 0], [-1.0, 1.0])

    def test_constant_feature(self):
        t = _table([[7.0, 7.0, 7.0], [1.0, 2.0, 3.0], ["a", "b", "a"]], [NUMERIC, NUMERIC, CATEGORICAL])
        with pytest.warns(MCGenWarning, match="constant"):
            s = scale_to_unit(t)
        assert np.array_equal(s.values[:, 0], [0.0, 0.0, 0.0])
        assert s.constant_features == (0,)
        assert np.array_equal(s.inverse_values()[:, 0], [7.0, 7.0, 7.0])

    def test_requires_encoding_first(self, small_csv):
        with pytest.raises(ValidationError, match="one-hot"):
            scale_to_unit(load_csv(small_csv))

    def test_needs_two_features(self):
        t = _table([[1.0, 2.0], ["a", "b"]], [NUMERIC, CATEGORICAL])
        with pytest.raises(ValidationError, match="at least 2"):
            scale_to_unit(t)

    @settings(max_examples=60, deadline=None)
    @given(arrays(float, st.tuples(st.integers(2, 20), st.integers(2, 5)),
                  elements=st.floats(-1e6, 1e6, allow_nan=False)))
    def test_round_trip(self, x):
        lo, hi = x.min(axis=0), x.max(axis=0)
        scaler = UnitScaler().fit(x)
        z = scaler.transform(x)
        assert z.min() >= -1 and z.max() <= 1
        back = scaler.inverse_transform(z)
        ok = hi > lo
        scale = np.maximum(np.abs(x[:, ok]).max(axis=0), 1.0)
        assert np.all(np.abs(back[:, ok] - x[:, ok]) <= 1e-12 * scale * 4)

    def test_round_trip_exact_tolerance(self):
        x = np.array([[0.1, -3.0], [0.7, 2.5], [0.35, 0.0]])
        z = UnitScaler().fit_transform(x)
        assert np.max(np.abs(inverse_scale(z, x.min(0), x.max(0)) - x)) <= 1e-12


class TestSplits:
    def test_split_by_label(self):
        s = _scaled([[0, 0], [0.5, 0.5], [1, 1]], ["A", "A", "B"])
        parts = split_by_label(s)
        assert list(parts) == ["A", "B"]
        assert parts["A"].n == 2 and parts["B"].n == 1
        assert np.array_equal(parts["A"].values, [[0, 0], [0.5, 0.5]])

    def test_split_by_label_single_class(self):
        s = _scaled([[0, 0], [1, 1]], ["A", "A"])
        parts = split_by_label(s)
        assert list(parts) == ["A"]
        assert np.array_equal(parts["A"].values, s.values)

    def test_sizes_20_80(self):
        s = _scaled(np.zeros((100, 2)), ["A"] * 100)
        seed, hold = split_train_seed(s, SplitSpec.for_scenario(1, 3))
        assert (seed.n, hold.n) == (20, 80)

    def test_stratified(self):
        s = _scaled(np.zeros((100, 2)), ["A"] * 50 + ["B"] * 50)
        seed, _ = split_train_seed(s, SplitSpec(0.2, 1, 0))
        assert sorted(seed.labels.tolist()) == ["A"] * 10 + ["B"] * 10

    def test_deterministic(self):
        s = _scaled(np.linspace(-1, 1, 20).reshape(10, 2), ["A", "B"] * 5)
        a = split_train_seed(s, SplitSpec(0.8, 2, 99))
        b = split_train_seed(s, SplitSpec(0.8, 2, 99))
        assert np.array_equal(a[0].values, b[0].values)
        assert np.array_equal(a[1].values, b[1].values)

    def test_defaults(self):
        assert SplitSpec.for_scenario(1).seed_fraction == 0.2
        assert SplitSpec.for_scenario(2).seed_fraction == 0.8
        with pytest.raises(ValidationError):
            SplitSpec(1.0, 1, 0)

    def test_singleton_class_goes_to_larger_side(self):
        seed, hold, single = stratified_indices(["A"] * 9 + ["B"], 0.2, 0)
        assert single == ["B"] and 9 in hold
        seed, hold, single = stratified_indices(["A"] * 9 + ["B"], 0.8, 0)
        assert 9 in seed

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.sampled_from("ABC"), min_size=2, max_size=60), st.floats(0.05, 0.95), st.integers(0, 2**32))
    def test_disjoint_union(self, labels, frac, seed):
        a, b, _ = stratified_indices(labels, frac, seed)
        assert not set(a) & set(b)
        assert sorted(np.concatenate([a, b]).tolist()) == list(range(len(labels)))
