"""Dataset ingestion, spectral-block PCA and cross-validation folds.

Input files are delimiter-separated text with a header row; a schema maps
column roles (two coordinates, one or more targets, features). Fold files
carry one 0-based integer per line so splits published elsewhere can be
replayed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist

from .errors import (
    DegenerateInput,
    DuplicateLocation,
    MissingValue,
    ShapeMismatch,
    TooFewSamples,
)

_RANK_RTOL = 1e-9


@dataclass(frozen=True)
class Dataset:
    """Tabular spatial dataset: planar coordinates, targets and features."""

    id: str
    locations: np.ndarray
    targets: dict[str, np.ndarray]
    features: np.ndarray
    feature_names: tuple[str, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        locs = np.asarray(self.locations, dtype=float)
        feats = np.asarray(self.features, dtype=float)
        n = locs.shape[0]
        if n < 2:
            raise TooFewSamples(f"dataset {self.id!r} has {n} rows, need >= 2")
        if locs.ndim != 2 or locs.shape[1] != 2:
            raise ShapeMismatch("locations must be an (n, 2) array")
        if pdist(locs).min() == 0.0:
            raise DuplicateLocation(f"dataset {self.id!r} has coincident locations")
        if feats.shape[0] != n:
            raise ShapeMismatch("feature matrix row count != n")
        if not np.all(np.isfinite(feats)):
            raise MissingValue(f"dataset {self.id!r} has non-finite feature values")
        if len(self.feature_names) != feats.shape[1]:
            raise ShapeMismatch("feature_names length != feature column count")
        for name, vec in self.targets.items():
            vec = np.asarray(vec, dtype=float)
            if vec.shape != (n,):
                raise ShapeMismatch(f"target {name!r} length != n")
            if not np.all(np.isfinite(vec)):
                raise MissingValue(f"target {name!r} has non-finite values")
            self.targets[name] = vec
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.locations.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def pss_count(self) -> int:
        return int(self.metadata.get("pss_count", 0))


@dataclass(frozen=True)
class FoldAssignment:
    """Partition of [0, n) into K non-empty folds."""

    fold_of: np.ndarray
    k: int
    seed: int | str

    def __post_init__(self):
        fold_of = np.asarray(self.fold_of, dtype=int)
        if self.k < 2:
            raise ValueError("need K >= 2 folds")
        present = np.unique(fold_of)
        if fold_of.min() < 0 or fold_of.max() >= self.k:
            raise ShapeMismatch("fold ids must lie in [0, K)")
        if len(present) != self.k:
            raise ShapeMismatch("every fold must be non-empty")
        object.__setattr__(self, "fold_of", fold_of)

    @property
    def n(self) -> int:
        return len(self.fold_of)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)


def load_dataset(
    path,
    schema: dict,
    dataset_id: str | None = None,
    delimiter: str = ",",
    metadata: dict | None = None,
) -> Dataset:
    """Read a delimiter-separated export into a Dataset.

    ``schema`` must provide ``x``, ``y`` (coordinate column names),
    ``targets`` and ``features`` (lists of column names). Any cell in those
    columns that is empty or not parseable as a number raises MissingValue.
    """
    frame = pd.read_csv(path, delimiter=delimiter, dtype=str)
    x_col, y_col = schema["x"], schema["y"]
    target_cols = list(schema["targets"])
    feature_cols = list(schema["features"])

    needed = [x_col, y_col, *target_cols, *feature_cols]
    missing_cols = [c for c in needed if c not in frame.columns]
    if missing_cols:
        raise ShapeMismatch(f"columns not in file: {missing_cols}")
    if len(frame) < 2:
        raise TooFewSamples(f"{path}: {len(frame)} rows, need >= 2")

    # Cells go through float(), which is correctly rounded, so values written
    # at full precision reload bit-for-bit (pandas' fast parser is not).
    numeric = {}
    for col in needed:
        cells = frame[col].to_numpy()
        out = np.empty(len(cells))
        for row, cell in enumerate(cells):
            try:
                if pd.isna(cell):
                    raise ValueError
                out[row] = float(cell)
            except (TypeError, ValueError):
                raise MissingValue(
                    f"{path}: column {col!r} row {row} is missing or non-numeric"
                ) from None
        numeric[col] = out

    locations = np.column_stack([numeric[x_col], numeric[y_col]])
    if pdist(locations).min() == 0.0:
        raise DuplicateLocation(f"{path}: duplicate coordinates")

    return Dataset(
        id=dataset_id or str(path),
        locations=locations,
        targets={c: numeric[c] for c in target_cols},
        features=np.column_stack([numeric[c] for c in feature_cols])
        if feature_cols
        else np.empty((len(frame), 0)),
        feature_names=tuple(feature_cols),
        metadata=dict(metadata or {}),
    )


def write_dataset(ds: Dataset, path, delimiter: str = ",") -> None:
    """Write a Dataset so a reload reproduces every value bit-for-bit.

    Cells are printed with repr(), the shortest representation that
    round-trips a finite double.
    """
    header = ["x", "y", *ds.targets.keys(), *ds.feature_names]
    columns = [ds.locations[:, 0], ds.locations[:, 1], *ds.targets.values()]
    columns += [ds.features[:, j] for j in range(ds.p)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(header)
        for i in range(ds.n):
            writer.writerow([repr(float(col[i])) for col in columns])


@dataclass(frozen=True)
class PCAModel:
    """Centered principal components fitted on one training block."""

    mean: np.ndarray
    components: np.ndarray  # (k, p), rows ordered by descending variance
    explained_variance: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]

    def transform(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        return (x - self.mean) @ self.components.T

    def inverse_transform(self, scores) -> np.ndarray:
        return np.asarray(scores, dtype=float) @ self.components + self.mean


def fit_pca(features, n_components: int) -> PCAModel:
    """Fit PCA on centered columns; k = min(n_components, rank).

    Component signs are fixed so each component's largest-magnitude loading
    is positive, making results deterministic across runs.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ShapeMismatch("feature matrix must be 2-D with >= 1 column")
    mean = x.mean(axis=0)
    centered = x - mean
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    tol = s[0] * _RANK_RTOL if s.size else 0.0
    rank = int(np.sum(s > tol))
    if rank == 0:
        raise DegenerateInput("feature matrix has zero total variance")
    k = min(n_components, rank)
    components = vt[:k]
    # Largest-magnitude loading positive, per component.
    for row in components:
        j = np.argmax(np.abs(row))
        if row[j] < 0:
            row *= -1.0
    explained = (s[:k] ** 2) / max(x.shape[0] - 1, 1)
    return PCAModel(mean=mean, components=components, explained_variance=explained)


def pca_reduce(features, n_components: int) -> np.ndarray:
    """Project features onto their first min(n_components, rank) components."""
    model = fit_pca(features, n_components)
    return model.transform(features)


def make_folds(n: int, k: int, seed: int) -> FoldAssignment:
    """Seeded uniform shuffle then contiguous chunks; sizes differ by <= 1."""
    if k > n:
        raise TooFewSamples(f"K={k} folds but only n={n} samples")
    if k < 2:
        raise ValueError("need K >= 2")
    rng = np.random.Generator(np.random.PCG64(seed))
    order = rng.permutation(n)
    sizes = np.full(k, n // k)
    sizes[: n % k] += 1
    fold_of = np.empty(n, dtype=int)
    start = 0
    for fold, size in enumerate(sizes):
        fold_of[order[start : start + size]] = fold
        start += size
    return FoldAssignment(fold_of=fold_of, k=k, seed=seed)


def load_folds(path) -> FoldAssignment:
    """Read one 0-based fold id per line."""
    with open(path) as fh:
        ids = [int(line.strip()) for line in fh if line.strip()]
    if not ids:
        raise ShapeMismatch(f"{path}: empty fold file")
    fold_of = np.asarray(ids, dtype=int)
    return FoldAssignment(fold_of=fold_of, k=int(fold_of.max()) + 1, seed="external")
