import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softrules.data import (
    DataError,
    Dataset,
    column_stats,
    kfold,
    load_csv,
    write_csv,
    write_fold_csv,
)


def _write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestLoadCsv:
    def test_three_row_file(self, tmp_path):
        path = _write(tmp_path, "a,b,y\n1,2,5\n3,4,6\n5,6,7\n")
        ds = load_csv(path, "y")
        assert ds.n == 3 and ds.p == 2
        assert ds.feature_names == ("a", "b")
        np.testing.assert_array_equal(ds.target, [5, 6, 7])
        np.testing.assert_array_equal(ds.features, [[1, 2], [3, 4], [5, 6]])

    def test_binary_target_validation(self, tmp_path):
        path = _write(tmp_path, "a,b,y\n1,2,5\n3,4,6\n5,6,7\n")
        with pytest.raises(DataError, match="outside"):
            load_csv(path, "y", target_kind="binary")

    def test_binary_target_ok(self, tmp_path):
        path = _write(tmp_path, "a,y\n1,0\n2,1\n")
        ds = load_csv(path, "y", target_kind="binary")
        assert ds.target_kind == "binary"

    def test_boston_shape(self, boston):
        assert boston.n == 506
        assert boston.p == 13

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="no such file"):
            load_csv(str(tmp_path / "nope.csv"), "y")

    def test_missing_target_column(self, tmp_path):
        path = _write(tmp_path, "a,b\n1,2\n")
        with pytest.raises(DataError, match="target column"):
            load_csv(path, "y")

    def test_non_numeric_cell(self, tmp_path):
        path = _write(tmp_path, "a,y\nfoo,2\n")
        with pytest.raises(DataError, match="non-numeric"):
            load_csv(path, "y")

    def test_nan_cell(self, tmp_path):
        path = _write(tmp_path, "a,y\nnan,2\n")
        with pytest.raises(DataError, match="non-finite"):
            load_csv(path, "y")

    def test_target_extracted_from_middle(self, tmp_path):
        path = _write(tmp_path, "a,y,b\n1,9,2\n")
        ds = load_csv(path, "y")
        assert ds.feature_names == ("a", "b")
        np.testing.assert_array_equal(ds.features, [[1, 2]])


class TestDatasetInvariants:
    def test_rejects_nonfinite_feature(self):
        with pytest.raises(DataError):
            Dataset(np.array([[np.inf]]), ("a",), np.array([1.0]))

    def test_rejects_duplicate_names(self):
        with pytest.raises(DataError, match="unique"):
            Dataset(np.ones((2, 2)), ("a", "a"), np.ones(2))

    def test_arrays_read_only(self):
        ds = Dataset(np.ones((2, 1)), ("a",), np.ones(2))
        with pytest.raises(ValueError):
            ds.features[0, 0] = 2.0


class TestRoundTrip:
    def test_write_then_load_is_identity(self, tmp_path, rng):
        feats = rng.standard_normal((20, 3)) * np.array([1e-8, 1.0, 1e12])
        ds = Dataset(feats, ("a", "b", "c"), rng.standard_normal(20))
        path = str(tmp_path / "rt.csv")
        write_csv(ds, path)
        back = load_csv(path, "y")
        np.testing.assert_array_equal(back.features, ds.features)
        np.testing.assert_array_equal(back.target, ds.target)
        assert back.feature_names == ds.feature_names


class TestKfold:
    def test_even_split(self):
        sizes = np.bincount(kfold(10, 5, seed=0).fold_of)
        np.testing.assert_array_equal(sizes, [2, 2, 2, 2, 2])

    def test_remainder_distribution(self):
        sizes = sorted(np.bincount(kfold(11, 5, seed=0).fold_of))
        assert sizes == [2, 2, 2, 2, 3]

    def test_deterministic(self):
        a = kfold(10, 5, seed=7)
        b = kfold(10, 5, seed=7)
        np.testing.assert_array_equal(a.fold_of, b.fold_of)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            kfold(10, 1, seed=0)
        with pytest.raises(ValueError):
            kfold(3, 4, seed=0)

    @given(n=st.integers(2, 200), k=st.integers(2, 20), seed=st.integers(0, 2**31))
    @settings(max_examples=60, deadline=None)
    def test_partition_property(self, n, k, seed):
        if k > n:
            return
        fa = kfold(n, k, seed)
        assert fa.fold_of.shape == (n,)
        sizes = np.bincount(fa.fold_of, minlength=k)
        assert sizes.sum() == n
        assert sizes.max() - sizes.min() <= 1
        assert sizes.min() >= 1

    def test_train_test_split_disjoint(self):
        fa = kfold(20, 4, seed=3)
        for f in range(4):
            tr, te = fa.train_rows(f), fa.test_rows(f)
            assert set(tr) | set(te) == set(range(20))
            assert not set(tr) & set(te)

    def test_fold_csv(self, tmp_path):
        fa = kfold(6, 3, seed=0)
        path = tmp_path / "folds.csv"
        write_fold_csv(fa, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "fold"
        assert [int(v) for v in lines[1:]] == list(fa.fold_of)


class TestColumnStats:
    def test_hand_values(self):
        ds = Dataset(np.array([[1.0], [2.0], [3.0]]), ("a",), np.zeros(3))
        stats = column_stats(ds)
        assert stats.mean[0] == pytest.approx(2.0)
        assert stats.sd[0] == pytest.approx(math.sqrt(2.0 / 3.0))

    def test_constant_column(self):
        ds = Dataset(np.array([[5.0], [5.0], [5.0]]), ("a",), np.zeros(3))
        stats = column_stats(ds)
        assert stats.mean[0] == 5.0
        assert stats.sd[0] == 0.0

    def test_min_max(self):
        ds = Dataset(np.array([[0.0], [1.0]]), ("a",), np.zeros(2))
        stats = column_stats(ds)
        assert stats.min[0] == 0.0 and stats.max[0] == 1.0 and stats.mean[0] == 0.5

    def test_sd_nonnegative_and_zero_iff_constant(self, rng):
        feats = np.column_stack([rng.standard_normal(50), np.full(50, 3.3)])
        ds = Dataset(feats, ("a", "b"), np.zeros(50))
        stats = column_stats(ds)
        assert stats.sd[0] > 0.0
        assert stats.sd[1] == 0.0
