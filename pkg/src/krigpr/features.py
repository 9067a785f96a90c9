"""Spatial feature augmentation built strictly from training observations.

Every method appends columns to the feature matrix. Test rows may use all
training observations; training rows exclude themselves wherever a method
aggregates neighbor target values, so a row's own target can never leak
into its own features.

Method names: kpr (OK prediction + variance), kpr_novar (prediction only),
idwpr (inverse-distance weighted mean of k neighbors), knnpr (plain mean of
k neighbors), knnmatrix (k distances + k observations), edf (distances to
the training bounding box corners and centre), coords, none.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist

from .data import make_folds
from .errors import TooFewNeighbors, TooFewSamples
from .kriging import loo_ok_features, ok_predict
from .regressors import fit_predict as regressor_fit_predict
from .variogram import VariogramModel, VariogramPolicy

METHOD_NAMES = ("kpr", "kpr_novar", "idwpr", "knnpr", "knnmatrix", "edf", "coords", "none")

_NEIGHBOR_METHODS = ("idwpr", "knnpr", "knnmatrix")
DEFAULT_K_GRID = tuple(range(2, 11))


@dataclass(frozen=True)
class FeatureMethod:
    """One augmentation method plus its hyperparameters."""

    name: str
    k: int | None = None
    power: float = 2.0

    def __post_init__(self):
        if self.name not in METHOD_NAMES:
            raise ValueError(f"unknown feature method {self.name!r}")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")

    @property
    def needs_k(self) -> bool:
        return self.name in _NEIGHBOR_METHODS

    @property
    def needs_variogram(self) -> bool:
        return self.name in ("kpr", "kpr_novar")


@dataclass(frozen=True)
class Split:
    """Train view plus test locations/features for one CV fold."""

    train_locations: np.ndarray
    train_values: np.ndarray
    train_features: np.ndarray
    test_locations: np.ndarray
    test_features: np.ndarray

    def __post_init__(self):
        for name in (
            "train_locations",
            "train_values",
            "train_features",
            "test_locations",
            "test_features",
        ):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @property
    def n_train(self) -> int:
        return self.train_locations.shape[0]


@dataclass(frozen=True)
class FeatureAugmentation:
    """Augmented matrices; original columns pass through unchanged."""

    method: FeatureMethod
    train_features: np.ndarray
    test_features: np.ndarray
    appended_names: tuple[str, ...]
    variogram: VariogramModel | None = None


def _nearest(dist_row: np.ndarray, k: int, exclude: int | None = None) -> np.ndarray:
    """Indices of the k smallest distances, ties toward lower index."""
    if exclude is not None:
        dist_row = dist_row.copy()
        dist_row[exclude] = np.inf
    order = np.argsort(dist_row, kind="stable")
    avail = len(dist_row) - (1 if exclude is not None else 0)
    if k > avail:
        raise TooFewNeighbors(f"k={k} but only {avail} neighbors available")
    return order[:k]


def _idw_value(dist: np.ndarray, vals: np.ndarray, k: int, power: float,
               exclude: int | None = None) -> float:
    idx = _nearest(dist, k, exclude)
    d = dist[idx]
    if d[0] == 0.0:
        return float(vals[idx[0]])
    w = d ** (-power)
    return float((w @ vals[idx]) / w.sum())


def idw_interpolate(train_locs, train_vals, query, k: int, power: float = 2.0) -> float:
    """Inverse-distance weighted mean of the k nearest observations.

    A query coincident with a training point short-circuits to that value.
    """
    locs = np.asarray(train_locs, dtype=float)
    vals = np.asarray(train_vals, dtype=float)
    dist = cdist(np.atleast_2d(np.asarray(query, dtype=float)), locs)[0]
    return _idw_value(dist, vals, k, power)


def knn_matrix_features(train_locs, train_vals, query, k: int) -> np.ndarray:
    """[d_1..d_k, y_1..y_k] for the k nearest observations, nearest first."""
    locs = np.asarray(train_locs, dtype=float)
    vals = np.asarray(train_vals, dtype=float)
    dist = cdist(np.atleast_2d(np.asarray(query, dtype=float)), locs)[0]
    idx = _nearest(dist, k)
    return np.concatenate([dist[idx], vals[idx]])


def _edf_anchors(train_locs: np.ndarray) -> np.ndarray:
    """Four bounding-box corners plus the centre of the training locations."""
    lo = train_locs.min(axis=0)
    hi = train_locs.max(axis=0)
    return np.array(
        [
            [lo[0], lo[1]],
            [lo[0], hi[1]],
            [hi[0], lo[1]],
            [hi[0], hi[1]],
            [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0],
        ]
    )


def augment(
    split: Split,
    method: FeatureMethod | str,
    variogram: VariogramModel | None = None,
    variogram_policy: VariogramPolicy | None = None,
) -> FeatureAugmentation:
    """Append one method's spatial columns to the train and test matrices.

    KpR variants fit a variogram on the training fold once (unless one is
    passed in) and reuse it for both the leave-one-out training rows and
    the test rows.
    """
    if isinstance(method, str):
        method = FeatureMethod(method)
    if method.needs_k and method.k is None:
        raise ValueError(f"method {method.name!r} needs k (tune_k or set explicitly)")

    tr_locs, te_locs = split.train_locations, split.test_locations
    vals = split.train_values
    n_tr = split.n_train

    if method.name == "none":
        return FeatureAugmentation(
            method, split.train_features.copy(), split.test_features.copy(), ()
        )

    if method.name == "coords":
        tr_cols, te_cols = tr_locs, te_locs
        names = ("coord_x", "coord_y")
    elif method.name == "edf":
        anchors = _edf_anchors(tr_locs)
        tr_cols = cdist(tr_locs, anchors)
        te_cols = cdist(te_locs, anchors)
        names = ("edf_c1", "edf_c2", "edf_c3", "edf_c4", "edf_centre")
    elif method.needs_variogram:
        model = variogram
        if model is None:
            model = (variogram_policy or VariogramPolicy()).fit(tr_locs, vals)
        loo = loo_ok_features(tr_locs, vals, model)
        preds = ok_predict(tr_locs, vals, model, te_locs)
        te = np.array([[p.mean, p.variance] for p in preds])
        if method.name == "kpr":
            tr_cols, te_cols = loo, te
            names = ("ok_mean", "ok_var")
        else:
            tr_cols, te_cols = loo[:, :1], te[:, :1]
            names = ("ok_mean",)
        return FeatureAugmentation(
            method,
            np.hstack([split.train_features, tr_cols]),
            np.hstack([split.test_features, te_cols]),
            names,
            variogram=model,
        )
    else:
        k, power = method.k, method.power
        if k >= n_tr:
            raise TooFewNeighbors(f"k={k} needs more than {n_tr} training rows")
        d_tr = cdist(tr_locs, tr_locs)
        d_te = cdist(te_locs, tr_locs)
        if method.name == "idwpr":
            tr_cols = np.array(
                [[_idw_value(d_tr[i], vals, k, power, exclude=i)] for i in range(n_tr)]
            )
            te_cols = np.array([[_idw_value(row, vals, k, power)] for row in d_te])
            names = ("idw_mean",)
        elif method.name == "knnpr":
            tr_cols = np.array(
                [[vals[_nearest(d_tr[i], k, exclude=i)].mean()] for i in range(n_tr)]
            )
            te_cols = np.array([[vals[_nearest(row, k)].mean()] for row in d_te])
            names = ("knn_mean",)
        else:  # knnmatrix
            def block(dist_row, exclude=None):
                idx = _nearest(dist_row, k, exclude)
                return np.concatenate([dist_row[idx], vals[idx]])

            tr_cols = np.array([block(d_tr[i], exclude=i) for i in range(n_tr)])
            te_cols = np.array([block(row) for row in d_te])
            names = tuple(f"knn_d{j + 1}" for j in range(k)) + tuple(
                f"knn_y{j + 1}" for j in range(k)
            )

    return FeatureAugmentation(
        method,
        np.hstack([split.train_features, tr_cols]),
        np.hstack([split.test_features, te_cols]),
        names,
    )


def tune_k(
    train_locations,
    train_values,
    train_features,
    method: FeatureMethod | str,
    regressor,
    k_grid=DEFAULT_K_GRID,
    seed: int = 0,
) -> int:
    """Pick k by inner 3-fold CV RMSE; ties break toward smaller k."""
    if isinstance(method, str):
        method = FeatureMethod(method)
    if not method.needs_k:
        raise ValueError(f"method {method.name!r} has no k to tune")
    locs = np.asarray(train_locations, dtype=float)
    vals = np.asarray(train_values, dtype=float)
    feats = np.asarray(train_features, dtype=float)
    n = locs.shape[0]
    if n < 12:
        raise TooFewSamples(f"k tuning needs n >= 12, got {n}")

    folds = make_folds(n, 3, seed)
    best_k = None
    best_rmse = np.inf
    for k in sorted(k_grid):
        if k >= min(len(folds.train_indices(f)) for f in range(3)):
            continue
        sq_sum = 0.0
        for f in range(3):
            tr, te = folds.train_indices(f), folds.test_indices(f)
            aug = augment(
                Split(locs[tr], vals[tr], feats[tr], locs[te], feats[te]),
                replace(method, k=k),
            )
            forecasts = regressor_fit_predict(
                regressor, aug.train_features, vals[tr], aug.test_features
            )
            pred = np.array([fc.mean for fc in forecasts])
            sq_sum += float(((vals[te] - pred) ** 2).sum())
        rmse = np.sqrt(sq_sum / n)
        if rmse < best_rmse - 1e-12:
            best_rmse = rmse
            best_k = k
    if best_k is None:
        raise TooFewSamples("no k in the grid fits the inner folds")
    return best_k
