"""Dataset loading, the bundled UCI sets, summaries and stratified folds."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Union

import numpy as np

BUILTIN_DATASETS = ("breast_cancer", "iris", "wine")


class DataError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple
    class_names: tuple
    name: str = "dataset"

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=float)
        y = np.ascontiguousarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DataError("features must be n x d and labels length n")
        if X.shape[0] < 2 or X.shape[1] < 1:
            raise DataError("dataset needs n >= 2 and d >= 1")
        if len(self.feature_names) != X.shape[1]:
            raise DataError("one feature name per column required")
        n_classes = len(self.class_names)
        if y.min() < 0 or y.max() >= n_classes:
            raise DataError("label ids must lie in [0, n_classes)")
        if len(np.unique(y)) < 2:
            raise DataError("single-class dataset: at least 2 distinct classes required")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.name == other.name
                and self.feature_names == other.feature_names
                and self.class_names == other.class_names
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels))


@dataclass(frozen=True)
class FeatureStats:
    mean: float
    std: float
    min: float
    max: float


@dataclass(frozen=True)
class DatasetSummary:
    n_samples: int
    n_features: int
    n_classes: int
    class_counts: tuple
    feature_stats: tuple
    missing_count: int = 0
    feature_names: tuple = ()
    class_names: tuple = ()

    def to_json(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "class_counts": list(self.class_counts),
            "missing_count": self.missing_count,
        }


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    fold_of: np.ndarray

    def train_test(self, fold: int):
        test = np.flatnonzero(self.fold_of == fold)
        train = np.flatnonzero(self.fold_of != fold)
        return train, test


def load_csv(path: Union[str, Path], label_column: Union[str, int] = "target", name: str = None) -> Dataset:
    """Parse a headered CSV; every non-label column must be numeric.

    Labels are factorized to class ids in order of first appearance.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file, header row required")
    header, body = rows[0], [r for r in rows[1:] if r]
    if isinstance(label_column, int):
        if not -len(header) <= label_column < len(header):
            raise DataError(f"label column index {label_column} out of range")
        label_idx = label_column % len(header)
    else:
        if label_column not in header:
            raise DataError(f"label column {label_column!r} not in header {header}")
        label_idx = header.index(label_column)
    feature_cols = [i for i in range(len(header)) if i != label_idx]

    features = np.empty((len(body), len(feature_cols)))
    class_index: dict = {}
    labels = []
    for r, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
        for j, col in enumerate(feature_cols):
            cell = row[col].strip()
            try:
                value = float(cell)
            except ValueError:
                value = None
            if value is None or not np.isfinite(value):
                cell_desc = "missing" if cell == "" or cell.lower() == "nan" else "non-numeric"
                raise DataError(f"{path}: {cell_desc} cell {cell!r} at row {r}, column {header[col]!r}")
            features[r - 2, j] = value
        labels.append(class_index.setdefault(row[label_idx], len(class_index)))
    if len(class_index) < 2:
        raise DataError(f"{path}: single-class label column {header[label_idx]!r}")
    return Dataset(
        features=features,
        labels=np.array(labels, dtype=np.int64),
        feature_names=tuple(header[i] for i in feature_cols),
        class_names=tuple(class_index),
        name=name or path.stem,
    )


def builtin(name: str) -> Dataset:
    if name not in BUILTIN_DATASETS:
        raise DataError(f"unknown dataset {name!r}; builtin datasets: {', '.join(BUILTIN_DATASETS)}")
    with resources.as_file(resources.files("mahpo") / "assets" / f"{name}.csv") as path:
        return load_csv(path, "target", name=name)


def summarize(dataset: Dataset) -> DatasetSummary:
    """Exact counts plus per-feature moments (population std)."""
    X = dataset.features
    counts = np.bincount(dataset.labels, minlength=dataset.n_classes)
    # sorting each column fixes the summation order, so row order cannot change the result
    Xs = np.sort(X, axis=0)
    mean = Xs.sum(axis=0) / X.shape[0]
    std = np.sqrt(np.sort((X - mean) ** 2, axis=0).sum(axis=0) / X.shape[0])
    stats = tuple(FeatureStats(float(m), float(s), float(lo), float(hi))
                  for m, s, lo, hi in zip(mean, std, Xs[0], Xs[-1]))
    return DatasetSummary(
        n_samples=dataset.n_samples,
        n_features=dataset.n_features,
        n_classes=dataset.n_classes,
        class_counts=tuple(int(c) for c in counts),
        feature_stats=stats,
        missing_count=int(np.isnan(X).sum()),
        feature_names=dataset.feature_names,
        class_names=dataset.class_names,
    )


def stratified_folds(dataset: Dataset, k: int, seed: int) -> FoldAssignment:
    """Shuffle each class by ``seed`` and deal its members round-robin into ``k`` folds."""
    counts = np.bincount(dataset.labels, minlength=dataset.n_classes)
    present = counts[counts > 0]
    if k < 2:
        raise DataError("k must be at least 2")
    if k > present.min():
        raise DataError(f"k={k} exceeds the smallest class count ({present.min()})")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(dataset.n_samples, dtype=np.int64)
    # classes are dealt in order of first appearance so renaming class ids cannot change the folds
    _, first = np.unique(dataset.labels, return_index=True)
    offset = 0
    for start in np.sort(first):
        members = np.flatnonzero(dataset.labels == dataset.labels[start])
        members = rng.permutation(members)
        # continuing the deal where the previous class stopped keeps total fold sizes within 1
        fold_of[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return FoldAssignment(k=k, fold_of=fold_of)
