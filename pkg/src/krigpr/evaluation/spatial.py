"""Spatial autocorrelation statistics and distribution characteristics.

Moran's I (global and local) runs on a k-nearest-neighbor graph with
inverse-distance weights, row-standardized. Local significance comes from
seeded conditional permutations: each location keeps its own value while
the remaining values are redrawn onto its neighbor slots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import pearsonr, skew

from ..errors import CorrUndefined, MoranUndefined, SkewUndefined, TooFewSamples

# pysal-style quadrant codes for (z, spatial lag) signs.
QUAD_HH, QUAD_LH, QUAD_LL, QUAD_HL = 1, 2, 3, 4


def _knn_idw_weights(locations: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """(n, k) neighbor indices and row-standardized 1/d weights."""
    d = cdist(locations, locations)
    np.fill_diagonal(d, np.inf)
    neighbors = np.argsort(d, kind="stable", axis=1)[:, :k]
    nd = np.take_along_axis(d, neighbors, axis=1)
    w = 1.0 / nd
    w /= w.sum(axis=1, keepdims=True)
    return neighbors, w


def _validate_moran_input(locations, values, k):
    locs = np.asarray(locations, dtype=float)
    vals = np.asarray(values, dtype=float)
    n = locs.shape[0]
    if n < 8:
        raise TooFewSamples(f"Moran's I needs n >= 8, got {n}")
    if k >= n:
        raise ValueError("k must be below n")
    if np.ptp(vals) == 0.0:
        raise MoranUndefined("values are constant")
    return locs, vals


def morans_i_global(locations, values, k: int = 6) -> float:
    """Global Moran's I over the kNN inverse-distance weight graph."""
    locs, vals = _validate_moran_input(locations, values, k)
    n = len(vals)
    neighbors, w = _knn_idw_weights(locs, k)
    z = vals - vals.mean()
    lag = (w * z[neighbors]).sum(axis=1)
    s0 = float(w.sum())  # n after row standardization
    return float((n / s0) * (z @ lag) / (z @ z))


@dataclass(frozen=True)
class LocalMoranResult:
    local_i: np.ndarray
    lag: np.ndarray
    p_values: np.ndarray
    quadrant: np.ndarray


def morans_i_local(
    locations,
    values,
    k: int = 6,
    permutations: int = 999,
    seed: int = 0,
) -> LocalMoranResult:
    """Local Moran's I with conditional-permutation p-values.

    p is the folded one-tail rank of the observed statistic among the
    permuted ones, (extreme + 1) / (permutations + 1).
    """
    locs, vals = _validate_moran_input(locations, values, k)
    n = len(vals)
    neighbors, w = _knn_idw_weights(locs, k)
    z = vals - vals.mean()
    m2 = float(z @ z) / n
    lag = (w * z[neighbors]).sum(axis=1)
    local_i = z * lag / m2

    rng = np.random.Generator(np.random.PCG64(seed))
    p_values = np.empty(n)
    for i in range(n):
        others = np.delete(z, i)
        # k draws without replacement per permutation, via random keys.
        keys = rng.random((permutations, n - 1))
        take = np.argpartition(keys, k, axis=1)[:, :k]
        sim_lag = others[take] @ w[i]
        sim_i = z[i] * sim_lag / m2
        if local_i[i] >= sim_i.mean():
            extreme = int((sim_i >= local_i[i]).sum())
        else:
            extreme = int((sim_i <= local_i[i]).sum())
        p_values[i] = (extreme + 1) / (permutations + 1)

    quadrant = np.where(
        z > 0,
        np.where(lag > 0, QUAD_HH, QUAD_HL),
        np.where(lag > 0, QUAD_LH, QUAD_LL),
    )
    return LocalMoranResult(local_i, lag, p_values, quadrant)


def classify_spatial_outliers(
    locations,
    values,
    k: int = 6,
    alpha: float = 0.05,
    permutations: int = 999,
    seed: int = 0,
) -> tuple[np.ndarray, float]:
    """Significant high-low / low-high locations and their frequency."""
    res = morans_i_local(locations, values, k=k, permutations=permutations, seed=seed)
    mask = (res.p_values <= alpha) & np.isin(res.quadrant, (QUAD_HL, QUAD_LH))
    return mask, float(mask.mean())


def skewness(values) -> float:
    """Adjusted Fisher-Pearson standardized moment coefficient."""
    vals = np.asarray(values, dtype=float)
    if len(vals) < 3:
        raise TooFewSamples("skewness needs n >= 3")
    if np.ptp(vals) == 0.0:
        raise SkewUndefined("values are constant")
    return float(skew(vals, bias=False))


def sd_norm(sds) -> np.ndarray:
    """Min-max normalize standard deviations across datasets.

    A single value maps to NaN (no spread to normalize against); identical
    values all map to 0.
    """
    sds = np.asarray(sds, dtype=float)
    if len(sds) < 2:
        return np.full(len(sds), np.nan)
    lo, hi = float(sds.min()), float(sds.max())
    if hi == lo:
        return np.zeros(len(sds))
    return (sds - lo) / (hi - lo)


def pearson_r_pvalue(a, b) -> tuple[float, float]:
    """Pearson r with its two-sided t-test p-value (df = n - 2)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) != len(b):
        raise ValueError("length mismatch")
    if len(a) < 3:
        raise TooFewSamples("correlation needs n >= 3")
    if np.ptp(a) == 0.0 or np.ptp(b) == 0.0:
        raise CorrUndefined("constant input")
    r, p = pearsonr(a, b)
    return float(r), float(p)
