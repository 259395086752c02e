"""Dataset loading, scaling, PCA and stratified splitting."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .encoding import Family, amplitude_normalize_rows, next_power_of_two

SCALE_HI = np.pi
EIG_CUTOFF = 1e-12


class DataError(ValueError):
    """Raised for unreadable or malformed dataset files."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    name: str
    class_count: int
    feature_names: tuple[str, ...] = ()
    class_values: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise DataError("feature and label row counts differ")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise DataError("labels outside [0, class_count)")

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, rows: np.ndarray) -> "Dataset":
        return replace(self, features=self.features[rows], labels=self.labels[rows])


@dataclass(frozen=True)
class PipelineSpec:
    target_dim: int | None = None
    scale_range: tuple[float, float] = (0.0, SCALE_HI)
    split_fraction: float = 0.8
    seed: int = 0


BUNDLED = {"wine": ("wine.csv", "class"), "diabetes": ("diabetes.csv", "Outcome")}
QUBITS = {"wine": 4, "diabetes": 3}


def _label_sort_key(value: str):
    try:
        return (0, float(value), value)
    except ValueError:
        return (1, 0.0, value)


def load_csv_dataset(path: str | os.PathLike, label_column: str, delimiter: str = ",", name: str | None = None) -> Dataset:
    """Parse a numeric CSV with a header row; labels become 0..k-1 in sorted
    order of the distinct label values."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    if label_column not in header:
        raise DataError(f"{path}: label column {label_column!r} not in header")
    if len(rows) < 2:
        raise DataError(f"{path}: no data rows")
    li = header.index(label_column)
    feats, raw_labels = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
        values = []
        for col, cell in enumerate(row):
            if col == li:
                continue
            try:
                values.append(float(cell))
            except ValueError:
                raise DataError(
                    f"{path}:{lineno}: non-numeric cell {cell!r} in column {header[col]!r}"
                ) from None
        feats.append(values)
        raw_labels.append(row[li].strip())
    classes = sorted(set(raw_labels), key=_label_sort_key)
    lookup = {c: i for i, c in enumerate(classes)}
    return Dataset(
        features=np.array(feats, dtype=float),
        labels=np.array([lookup[v] for v in raw_labels], dtype=int),
        name=name or path.stem,
        class_count=len(classes),
        feature_names=tuple(h for i, h in enumerate(header) if i != li),
        class_values=tuple(classes),
    )


def load_bundled(name: str) -> Dataset:
    if name not in BUNDLED:
        raise DataError(f"unknown bundled dataset {name!r}; choose from {sorted(BUNDLED)}")
    filename, label = BUNDLED[name]
    with resources.as_file(resources.files("vqcbench") / "datasets" / filename) as p:
        return load_csv_dataset(p, label, name=name)


def default_qubits(dataset: Dataset) -> int:
    """Qubits needed to amplitude-encode one row, at least one."""
    return max(1, int(math.log2(next_power_of_two(dataset.features.shape[1]))))


# --------------------------------------------------------------------------
# transforms


@dataclass(frozen=True)
class MinMaxFit:
    low: np.ndarray
    high: np.ndarray
    range: tuple[float, float] = (0.0, SCALE_HI)

    def transform(self, x: np.ndarray) -> np.ndarray:
        lo, hi = self.range
        x = np.asarray(x, dtype=float)
        span = self.high - self.low
        constant = span == 0
        scaled = (x - self.low) / np.where(constant, 1.0, span) * (hi - lo) + lo
        scaled = np.where(constant, (lo + hi) / 2, scaled)
        return np.clip(scaled, lo, hi)


def minmax_scale(train: np.ndarray, *apply_to: np.ndarray, scale_range=(0.0, SCALE_HI)):
    """Fit per-feature min/max on ``train`` and map it onto ``scale_range``.

    Returns ``(scaled_train, [scaled others], fit)``; other matrices are
    clamped into the range and constant features land on its midpoint.
    """
    train = np.asarray(train, dtype=float)
    if len(train) == 0:
        raise DataError("cannot fit scaling on an empty training set")
    fit = MinMaxFit(train.min(axis=0), train.max(axis=0), tuple(scale_range))
    return fit.transform(train), [fit.transform(x) for x in apply_to], fit


@dataclass(frozen=True)
class PCAFit:
    mean: np.ndarray
    components: np.ndarray  # (target_dim, features), orthonormal rows
    variances: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) @ self.components.T

    def inverse_transform(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z) @ self.components + self.mean


def pca_fit(train: np.ndarray, target_dim: int) -> PCAFit:
    train = np.asarray(train, dtype=float)
    if train.shape[0] < 2:
        raise DataError("PCA needs at least two training rows")
    if not 1 <= target_dim <= train.shape[1]:
        raise DataError(f"target_dim {target_dim} outside [1, {train.shape[1]}]")
    mean = train.mean(axis=0)
    cov = np.cov(train - mean, rowvar=False).reshape(train.shape[1], train.shape[1])
    values, vectors = np.linalg.eigh(cov)
    order = np.argsort(values)[::-1]
    values, vectors = values[order], vectors[:, order]
    usable = int(np.sum(values > EIG_CUTOFF * max(1.0, values[0])))
    if usable < target_dim:
        raise DataError(f"only {usable} non-degenerate components, {target_dim} requested")
    comps = vectors[:, :target_dim].T.copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    return PCAFit(mean, comps, values[:target_dim])


def pca_fit_transform(train: np.ndarray, target_dim: int, *apply_to: np.ndarray):
    fit = pca_fit(train, target_dim)
    return fit.transform(train), [fit.transform(x) for x in apply_to], fit


def _round_half_even(x: float) -> int:
    return int(round(x))  # Python rounds halves to even


def train_test_split(dataset: Dataset, fraction: float = 0.8, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Seeded stratified split; each class sends round_half_even((1-f)·n_c)
    rows to test and the rest to train. Both parts keep file order."""
    if len(dataset) < 5:
        raise DataError("need at least 5 rows to split")
    rng = np.random.default_rng(seed)
    train_rows, test_rows = [], []
    for c in range(dataset.class_count):
        members = np.flatnonzero(dataset.labels == c)
        if len(members) < 2:
            raise DataError(f"class {c} has fewer than 2 rows")
        members = rng.permutation(members)
        n_test = _round_half_even((1 - fraction) * len(members))
        n_test = min(max(n_test, 1), len(members) - 1)
        test_rows.append(members[:n_test])
        train_rows.append(members[n_test:])
    train = np.sort(np.concatenate(train_rows))
    test = np.sort(np.concatenate(test_rows))
    return dataset.subset(train), dataset.subset(test)


@dataclass(frozen=True)
class Prepared:
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    num_qubits: int
    num_classes: int


def prepare(train: Dataset, test: Dataset, family: Family, pipeline: PipelineSpec) -> Prepared:
    """Model-ready features for one split.

    Angle: scale to the range, PCA to ``target_dim``, scale the components
    back into the range. Amplitude: scale, zero-pad to 2**n, unit-normalize
    each row. Every fit uses training rows only.
    """
    family = Family(family)
    rng_ = pipeline.scale_range
    tr, (te,), _ = minmax_scale(train.features, test.features, scale_range=rng_)
    if family == Family.ANGLE:
        dim = pipeline.target_dim or default_qubits(train)
        tr, (te,), _ = pca_fit_transform(tr, dim, te)
        tr, (te,), _ = minmax_scale(tr, te, scale_range=rng_)
        n = dim
    elif family == Family.AMPLITUDE:
        tr = amplitude_normalize_rows(tr)
        te = amplitude_normalize_rows(te)
        n = int(math.log2(tr.shape[1]))
    else:
        raise DataError(f"{family.value} encoding has no data pipeline")
    return Prepared(tr, train.labels, te, test.labels, n, train.class_count)
