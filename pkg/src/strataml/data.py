"""Datasets, CSV ingestion, stratified subsampling and fold planning.

All sampling is without replacement and stratified: per-class counts follow
largest-remainder proportional allocation (never letting a class disappear),
and fold assignment deals shuffled class members round-robin so fold sizes
differ by at most one both overall and per class.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .rng import RngStream

__all__ = [
    "Dataset",
    "SubsetView",
    "DataError",
    "load_csv",
    "write_csv",
    "stratified_allocation",
    "stratified_sample",
    "kfold_plan",
]


class DataError(ValueError):
    """Raised for malformed input files or invalid sampling requests."""


@dataclass(frozen=True)
class Dataset:
    """Dense numeric classification dataset with labels encoded to [0, C)."""

    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DataError("features must be (N, F) with one label per row")
        if X.shape[0] == 0 or X.shape[1] == 0:
            raise DataError("dataset must have at least one row and one feature")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain missing or non-finite values")
        if y.min(initial=0) < 0:
            raise DataError("labels must be non-negative integers")
        c = int(y.max()) + 1
        counts = np.bincount(y, minlength=c)
        if c < 2:
            raise DataError("dataset must contain at least two classes")
        if np.any(counts == 0):
            raise DataError("labels must cover every class in [0, C)")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


@dataclass(frozen=True)
class SubsetView:
    """A sorted, duplicate-free row-index view into a dataset."""

    source: Dataset
    indices: np.ndarray
    token: str = field(default="", compare=False)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise DataError("subset must contain at least one row")
        if idx.min() < 0 or idx.max() >= self.source.n:
            raise DataError("subset indices out of range")
        if np.any(np.diff(idx) <= 0):
            raise DataError("subset indices must be sorted and unique")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        if not self.token:
            digest = hashlib.blake2b(idx.tobytes(), digest_size=8).hexdigest()
            object.__setattr__(self, "token", f"{self.source.name}:{idx.size}:{digest}")

    @property
    def sample_size(self) -> int:
        return int(self.indices.size)

    def materialize(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.source.features[self.indices], self.source.labels[self.indices]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.source.labels[self.indices], minlength=self.source.n_classes)


def stratified_allocation(class_counts: Sequence[int], s: int) -> List[int]:
    """Largest-remainder allocation of `s` draws over classes, each class >= 1.

    When a class quota s*n_c/N falls below one, the mandatory single instance
    is taken from the class currently most over its quota.
    """
    counts = [int(c) for c in class_counts]
    total = sum(counts)
    n_classes = len(counts)
    if s < n_classes:
        raise DataError(f"sample size {s} below class count {n_classes}")
    if s > total:
        raise DataError(f"sample size {s} exceeds {total} rows")
    quotas = [s * c / total for c in counts]
    alloc = [math.floor(q) for q in quotas]
    remainder = s - sum(alloc)
    order = sorted(range(n_classes), key=lambda i: (-(quotas[i] - alloc[i]), i))
    for i in order[:remainder]:
        alloc[i] += 1
    for i in range(n_classes):
        while alloc[i] == 0:
            donor = max(
                (j for j in range(n_classes) if alloc[j] > 1),
                key=lambda j: (alloc[j] - quotas[j], alloc[j], -j),
            )
            alloc[donor] -= 1
            alloc[i] += 1
    return alloc


def stratified_sample(dataset: Dataset, s: int, rng: RngStream) -> SubsetView:
    """Uniform draw without replacement of `s` rows preserving class proportions."""
    counts = dataset.class_counts
    alloc = stratified_allocation(counts, s)
    gen = rng.generator()
    picked = []
    for c, take in enumerate(alloc):
        members = np.flatnonzero(dataset.labels == c)
        picked.append(gen.choice(members, size=take, replace=False))
    indices = np.sort(np.concatenate(picked))
    return SubsetView(dataset, indices)


def kfold_plan(
    subset: SubsetView, folds: int, rng: RngStream
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold plan over subset positions (0..s-1).

    Test sets partition the subset; sizes differ by <= 1 overall and per class.
    Deterministic for a given rng stream.
    """
    if folds < 2:
        raise DataError("need at least 2 folds")
    labels = subset.source.labels[subset.indices]
    s = labels.size
    gen = rng.generator()
    fold_of = np.empty(s, dtype=np.int64)
    pointer = 0
    for c in range(int(labels.max()) + 1):
        members = np.flatnonzero(labels == c)
        if members.size == 0:
            continue
        if members.size < folds:
            raise DataError(f"class {c} has {members.size} members, fewer than {folds} folds")
        gen.shuffle(members)
        for j, pos in enumerate(members):
            fold_of[pos] = (pointer + j) % folds
        pointer = (pointer + members.size) % folds
    plan = []
    for f in range(folds):
        test = np.flatnonzero(fold_of == f)
        train = np.flatnonzero(fold_of != f)
        plan.append((train, test))
    return plan


def _parse_label_selector(header: List[str], label: Union[str, int]) -> int:
    if isinstance(label, int):
        if not 0 <= label < len(header):
            raise DataError(f"label column index {label} out of range")
        return label
    if label in header:
        return header.index(label)
    if label.lstrip("-").isdigit():
        return _parse_label_selector(header, int(label))
    raise DataError(f"label column {label!r} not found in header {header}")


def load_csv(path: str, label: Union[str, int]) -> Dataset:
    """Load a headered CSV: numeric columns become features, string columns are
    ordinal-encoded by first appearance, labels are encoded to [0, C).

    Missing/empty and non-finite cells are rejected with the offending
    row/column named; a single-class label column is rejected.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    if not rows:
        raise DataError(f"{path}: no data rows")
    n_cols = len(header)
    for r, row in enumerate(rows, start=2):
        if len(row) != n_cols:
            raise DataError(f"{path}: row {r} has {len(row)} cells, expected {n_cols}")

    label_idx = _parse_label_selector(header, label)
    columns = list(zip(*rows))

    def parse_column(col_idx: int) -> Tuple[Optional[np.ndarray], List[str]]:
        """(numeric values, raw strings); numeric is None when any cell is textual."""
        raw = [cell.strip() for cell in columns[col_idx]]
        for r, cell in enumerate(raw, start=2):
            if cell == "":
                raise DataError(f"{path}: missing value at row {r}, column {header[col_idx]!r}")
        values = np.empty(len(raw))
        for r, cell in enumerate(raw):
            try:
                v = float(cell)
            except ValueError:
                return None, raw
            if not math.isfinite(v):
                raise DataError(
                    f"{path}: non-finite value {cell!r} at row {r + 2}, "
                    f"column {header[col_idx]!r}"
                )
            values[r] = v
        return values, raw

    feature_cols = []
    for c in range(n_cols):
        if c == label_idx:
            continue
        numeric, raw = parse_column(c)
        if numeric is None:
            seen: dict[str, int] = {}
            encoded = np.empty(len(raw))
            for r, cell in enumerate(raw):
                encoded[r] = seen.setdefault(cell, len(seen))
            feature_cols.append(encoded)
        else:
            feature_cols.append(numeric)
    if not feature_cols:
        raise DataError(f"{path}: no feature columns besides the label")

    numeric_labels, raw_labels = parse_column(label_idx)
    if numeric_labels is None:
        seen = {}
        labels = np.array([seen.setdefault(cell, len(seen)) for cell in raw_labels], dtype=np.int64)
    else:
        if np.any(numeric_labels != np.round(numeric_labels)):
            raise DataError(f"{path}: label column {header[label_idx]!r} has non-integer values")
        distinct = np.unique(numeric_labels.astype(np.int64))
        remap = {v: i for i, v in enumerate(distinct.tolist())}
        labels = np.array([remap[int(v)] for v in numeric_labels], dtype=np.int64)
    if len(set(labels.tolist())) < 2:
        raise DataError(f"{path}: label column {header[label_idx]!r} has a single class")

    import os

    name = os.path.splitext(os.path.basename(path))[0]
    return Dataset(np.column_stack(feature_cols), labels, name=name)


def write_csv(dataset: Dataset, path: str) -> None:
    """Write a dataset as a headered CSV (features at full repr precision)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(dataset.n_features)] + ["label"])
        for row, lab in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(lab)])
