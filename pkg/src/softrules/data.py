"""Dataset container, CSV ingestion, fold assignment and column statistics."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

TARGET_KINDS = ("continuous", "binary")


class DataError(ValueError):
    """Input data violates the ingestion contract (bad cell, bad target, ...)."""


@dataclass(frozen=True)
class Dataset:
    """Numeric feature matrix plus a continuous or binary target.

    All values are finite float64; binary targets contain only 0 and 1.
    Instances are immutable (arrays are marked read-only) and safe to share
    across worker threads.
    """

    features: np.ndarray
    feature_names: tuple[str, ...]
    target: np.ndarray
    target_kind: str = "continuous"

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        targ = np.ascontiguousarray(self.target, dtype=np.float64)
        if feats.ndim != 2:
            raise DataError("features must be a 2-d matrix")
        n, p = feats.shape
        if n < 1 or p < 1:
            raise DataError("need at least one row and one feature")
        names = tuple(str(s) for s in self.feature_names)
        if len(names) != p:
            raise DataError(f"{len(names)} feature names for {p} columns")
        if len(set(names)) != p:
            raise DataError("feature names must be unique")
        if targ.shape != (n,):
            raise DataError("target length does not match feature rows")
        if not np.all(np.isfinite(feats)):
            raise DataError("non-finite feature value")
        if not np.all(np.isfinite(targ)):
            raise DataError("non-finite target value")
        if self.target_kind not in TARGET_KINDS:
            raise DataError(f"unknown target_kind {self.target_kind!r}")
        if self.target_kind == "binary" and not np.all(np.isin(targ, (0.0, 1.0))):
            raise DataError("binary target contains values outside {0, 1}")
        feats.setflags(write=False)
        targ.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "target", targ)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "Dataset":
        """New Dataset restricted to the given row indices."""
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(
            self.features[rows], self.feature_names, self.target[rows], self.target_kind
        )


@dataclass(frozen=True)
class FoldAssignment:
    """Partition of n rows into k folds whose sizes differ by at most one."""

    fold_of: np.ndarray
    k: int

    def __post_init__(self):
        arr = np.ascontiguousarray(self.fold_of, dtype=np.intp)
        arr.setflags(write=False)
        object.__setattr__(self, "fold_of", arr)

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)


def _parse_cell(text: str, row: int, col: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"non-numeric value {text!r} in column {col!r}, data row {row}") from None
    if math.isnan(value) or math.isinf(value):
        raise DataError(f"non-finite value {text!r} in column {col!r}, data row {row}")
    return value


def load_csv(path, target_column: str, target_kind: str = "continuous") -> Dataset:
    """Read a comma-separated file with a header row into a Dataset.

    The target column is extracted; the remaining columns become features in
    header order. Cells must parse as finite numbers ('.' decimal point).
    """
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"empty file: {path}") from None
        header = [h.strip() for h in header]
        if target_column not in header:
            raise DataError(f"target column {target_column!r} not in header {header}")
        t_idx = header.index(target_column)
        feature_names = [h for i, h in enumerate(header) if i != t_idx]
        rows = []
        for r, record in enumerate(reader):
            if not record:
                continue
            if len(record) != len(header):
                raise DataError(f"row {r} has {len(record)} cells, expected {len(header)}")
            rows.append([_parse_cell(c, r, header[i]) for i, c in enumerate(record)])
    if not rows:
        raise DataError(f"no data rows in {path}")
    table = np.asarray(rows, dtype=np.float64)
    target = table[:, t_idx]
    features = np.delete(table, t_idx, axis=1)
    return Dataset(features, tuple(feature_names), target, target_kind)


def load_feature_matrix(path, feature_names) -> np.ndarray:
    """Read only the named feature columns from a CSV, in the given order.

    Unlike load_csv this accepts a header-only file (returns a 0-row matrix);
    used by prediction on new data.
    """
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"empty file: {path}") from None
        missing = [name for name in feature_names if name not in header]
        if missing:
            raise DataError(f"missing feature column(s): {', '.join(missing)}")
        idx = [header.index(name) for name in feature_names]
        rows = []
        for r, record in enumerate(reader):
            if not record:
                continue
            rows.append([_parse_cell(record[i], r, header[i]) for i in idx])
    if not rows:
        return np.empty((0, len(idx)), dtype=np.float64)
    return np.asarray(rows, dtype=np.float64)


def write_csv(dataset: Dataset, path, target_name: str = "y") -> None:
    """Write a Dataset back to CSV; floats use shortest round-trip text."""
    if target_name in dataset.feature_names:
        raise DataError(f"target name {target_name!r} collides with a feature")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(dataset.feature_names) + [target_name])
        for i in range(dataset.n):
            writer.writerow(
                [repr(float(v)) for v in dataset.features[i]] + [repr(float(dataset.target[i]))]
            )


def kfold(n: int, k: int, seed: int) -> FoldAssignment:
    """Deal a seeded random permutation of n rows round-robin into k folds."""
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    fold_of = np.empty(n, dtype=np.intp)
    fold_of[perm] = np.arange(n) % k
    return FoldAssignment(fold_of, k)


def write_fold_csv(assignment: FoldAssignment, path) -> None:
    """Audit dump: one fold index per row."""
    with open(path, "w", newline="") as fh:
        fh.write("fold\n")
        for f in assignment.fold_of:
            fh.write(f"{int(f)}\n")


@dataclass(frozen=True)
class ColumnStats:
    mean: np.ndarray
    sd: np.ndarray
    min: np.ndarray
    max: np.ndarray


def column_stats(dataset: Dataset) -> ColumnStats:
    """Per-feature mean, population standard deviation, min and max."""
    feats = dataset.features
    return ColumnStats(
        mean=feats.mean(axis=0),
        sd=feats.std(axis=0),
        min=feats.min(axis=0),
        max=feats.max(axis=0),
    )
