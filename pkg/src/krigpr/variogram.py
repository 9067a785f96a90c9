"""Empirical semivariogram estimation and parametric model fitting.

Semivariance of a pair is half the squared value difference. Parametric
models use the effective-range convention: ``range_`` is the lag at which
the model reaches the sill for the spherical family and ~95% of the sill
(factor ``1 - exp(-3)``) for the exponential and gaussian families, so the
parameter means the same correlation length to every caller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import pdist

from .errors import (
    DomainError,
    DuplicateLocation,
    EmptyVariogram,
    FitFailure,
    InsufficientBins,
    TooFewSamples,
)

FAMILIES = ("spherical", "exponential", "gaussian")

# Deterministic restart points as (nugget, partial sill, range) fractions of
# (variance, variance, max lag).
_INITS = (
    (0.0, 1.0, 0.5),
    (0.0, 1.0, 0.15),
    (0.5, 0.5, 0.5),
    (0.05, 0.95, 1.0),
    (0.9, 0.1, 0.3),
)

_OPT_OPTIONS = {"maxiter": 500, "ftol": 1e-14, "gtol": 1e-12}


@dataclass(frozen=True)
class EmpiricalVariogram:
    """Binned semivariance estimates.

    ``lag_centers`` holds the mean pair distance per retained bin and is
    strictly increasing; bins without pairs are dropped.
    """

    lag_centers: np.ndarray
    semivariances: np.ndarray
    pair_counts: np.ndarray
    max_lag: float

    @property
    def n_bins(self) -> int:
        return len(self.lag_centers)


@dataclass(frozen=True)
class VariogramModel:
    """Fitted parametric semivariogram.

    gamma(0) is 0 by convention; the nugget appears as a jump for h -> 0+.
    """

    family: str
    nugget: float
    partial_sill: float
    range_: float

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown variogram family {self.family!r}")
        if self.nugget < 0 or self.partial_sill < 0 or self.range_ <= 0:
            raise ValueError(
                "variogram parameters must satisfy nugget >= 0, "
                "partial_sill >= 0, range > 0"
            )

    @property
    def sill(self) -> float:
        return self.nugget + self.partial_sill


def gamma(model: VariogramModel, h) -> np.ndarray | float:
    """Evaluate the model semivariance at lag(s) ``h`` (meters, >= 0)."""
    h_arr = np.asarray(h, dtype=float)
    if np.any(h_arr < 0):
        raise DomainError("lag distance must be non-negative")
    a = model.range_
    if model.family == "spherical":
        frac = np.clip(h_arr / a, 0.0, 1.0)
        structured = 1.5 * frac - 0.5 * frac**3
    elif model.family == "exponential":
        structured = 1.0 - np.exp(-3.0 * h_arr / a)
    else:  # gaussian
        structured = 1.0 - np.exp(-3.0 * (h_arr / a) ** 2)
    out = np.where(h_arr > 0, model.nugget + model.partial_sill * structured, 0.0)
    if np.isscalar(h) or np.ndim(h) == 0:
        return float(out)
    return out


def empirical_semivariogram(
    locations,
    values,
    n_bins: int = 15,
    max_lag: float | None = None,
) -> EmpiricalVariogram:
    """Bin half squared differences of all pairs with distance <= max_lag.

    ``max_lag`` defaults to half the maximum pairwise distance. Bins are
    uniform on [0, max_lag]; a bin's lag center is the mean distance of its
    pairs. Accumulation uses a fixed reduction order, so results do not
    depend on how callers chunk the data.
    """
    locs = np.asarray(locations, dtype=float)
    vals = np.asarray(values, dtype=float)
    if locs.shape[0] < 2:
        raise TooFewSamples("need at least 2 locations")
    if locs.shape[0] != vals.shape[0]:
        raise ValueError("locations and values length mismatch")

    dists = pdist(locs)
    if np.any(dists == 0.0):
        raise DuplicateLocation("coincident locations in semivariogram input")
    if max_lag is None:
        max_lag = 0.5 * float(dists.max())
    if max_lag <= 0:
        raise ValueError("max_lag must be positive")

    semis = 0.5 * pdist(vals[:, None], metric="sqeuclidean")
    keep = dists <= max_lag
    if not np.any(keep):
        raise EmptyVariogram(f"no pair within max_lag={max_lag}")
    d = dists[keep]
    g = semis[keep]

    width = max_lag / n_bins
    idx = np.minimum((d / width).astype(int), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    sum_g = np.bincount(idx, weights=g, minlength=n_bins)
    sum_d = np.bincount(idx, weights=d, minlength=n_bins)

    nonempty = counts > 0
    return EmpiricalVariogram(
        lag_centers=sum_d[nonempty] / counts[nonempty],
        semivariances=sum_g[nonempty] / counts[nonempty],
        pair_counts=counts[nonempty],
        max_lag=float(max_lag),
    )


def _round_sig(x: np.ndarray, digits: int = 9) -> np.ndarray:
    """Round to ``digits`` significant figures, elementwise."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    nonzero = x != 0
    mag = np.floor(np.log10(np.abs(x[nonzero])))
    scale = 10.0 ** (digits - 1 - mag)
    out[nonzero] = np.round(x[nonzero] * scale) / scale
    return out


def _weighted_sse(params, family: str, ev: EmpiricalVariogram, floor: float) -> float:
    """Cressie-weighted squared error: sum N(h) * (ge - gm)^2 / gm^2."""
    nugget, psill, rng = params
    model = VariogramModel(family, max(nugget, 0.0), max(psill, 0.0), max(rng, 1e-300))
    gm = np.asarray(gamma(model, ev.lag_centers))
    denom = np.maximum(gm, floor) ** 2
    return float(np.sum(ev.pair_counts * (ev.semivariances - gm) ** 2 / denom))


def fit_variogram(
    ev: EmpiricalVariogram,
    families=FAMILIES,
    sample_variance: float | None = None,
) -> VariogramModel:
    """Fit candidate families by Cressie-weighted least squares.

    Each family is minimized with bounded L-BFGS-B from the fixed restart
    grid and the family with the lowest weighted SSE wins. Bounds:
    nugget in [0, s2], partial sill in [0, 2*s2], range in (0, 2*max_lag],
    where s2 is the sample variance of the values (estimated from the bin
    semivariances when not supplied).

    Inputs are canonicalized to 9 significant figures first. The objective
    is flat enough near its minimum that last-bit input differences would
    otherwise move the fitted parameters by ~1e-8 relative, breaking
    translation invariance of downstream kriging (fitting on y and on
    y - const must give the same model).
    """
    if ev.n_bins < 3:
        raise InsufficientBins(f"need >= 3 bins, got {ev.n_bins}")
    for fam in families:
        if fam not in FAMILIES:
            raise ValueError(f"unknown variogram family {fam!r}")

    if not np.any(ev.semivariances > 0):
        # Constant field: flat zero model.
        return VariogramModel("spherical", 0.0, 0.0, ev.max_lag)

    ev = EmpiricalVariogram(
        lag_centers=_round_sig(ev.lag_centers),
        semivariances=_round_sig(ev.semivariances),
        pair_counts=ev.pair_counts,
        max_lag=ev.max_lag,
    )
    s2 = float(sample_variance) if sample_variance is not None else float(
        ev.semivariances.max()
    )
    s2 = float(_round_sig(s2))
    if s2 <= 0:
        return VariogramModel("spherical", 0.0, 0.0, ev.max_lag)

    bounds = [(0.0, s2), (0.0, 2.0 * s2), (1e-6 * ev.max_lag, 2.0 * ev.max_lag)]
    floor = 1e-10 * s2

    best: tuple[float, VariogramModel] | None = None
    for fam in families:
        fam_best: tuple[float, np.ndarray] | None = None
        for fn, fp, fr in _INITS:
            x0 = np.array([fn * s2, fp * s2, max(fr * ev.max_lag, 1e-6 * ev.max_lag)])
            res = minimize(
                _weighted_sse,
                x0,
                args=(fam, ev, floor),
                method="L-BFGS-B",
                bounds=bounds,
                options=_OPT_OPTIONS,
            )
            if not np.all(np.isfinite(res.x)) or not np.isfinite(res.fun):
                continue
            if fam_best is None or res.fun < fam_best[0]:
                fam_best = (float(res.fun), res.x)
        if fam_best is None:
            continue
        # One polish pass from the family's best point.
        res = minimize(
            _weighted_sse,
            fam_best[1],
            args=(fam, ev, floor),
            method="L-BFGS-B",
            bounds=bounds,
            options=_OPT_OPTIONS,
        )
        if np.all(np.isfinite(res.x)) and np.isfinite(res.fun) and res.fun <= fam_best[0]:
            fam_best = (float(res.fun), res.x)
        nugget, psill, rng = fam_best[1]
        model = VariogramModel(fam, float(nugget), float(psill), float(rng))
        if best is None or fam_best[0] < best[0]:
            best = (fam_best[0], model)

    if best is None:
        raise FitFailure("no variogram family produced a finite fit")
    return best[1]


@dataclass(frozen=True)
class VariogramPolicy:
    """Binning and fitting defaults reused by kriging-based pipelines."""

    n_bins: int = 15
    max_lag: float | None = None
    families: tuple[str, ...] = FAMILIES

    def fit(self, locations, values) -> VariogramModel:
        ev = empirical_semivariogram(
            locations, values, n_bins=self.n_bins, max_lag=self.max_lag
        )
        if ev.n_bins < 3:
            raise InsufficientBins(f"need >= 3 bins, got {ev.n_bins}")
        s2 = float(np.var(np.asarray(values, dtype=float)))
        return fit_variogram(ev, families=self.families, sample_variance=s2)
