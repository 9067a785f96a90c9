"""Ordinary kriging in semivariance form.

The bordered system is factorized once per training configuration and
reused for every query. Leave-one-out training features come from the
inverse of the same bordered matrix, which yields each held-out solution
without refitting and, crucially, never multiplies an observation into its
own row (the self weight is set to exactly 0.0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.spatial.distance import cdist, pdist, squareform

from .errors import NumericalFailure, SingularSystem, TooFewSamples
from .variogram import VariogramModel, gamma

_COND_LIMIT = 1e12
_JITTER = 1e-10


@dataclass(frozen=True)
class KrigingPrediction:
    """Prediction at one location: mean, error variance, multiplier, weights."""

    mean: float
    variance: float
    lagrange: float
    weights: np.ndarray


def _clamp_variance(var: float, sill: float) -> float:
    """Clamp rounding-level negatives to 0; larger negatives are errors."""
    if var >= 0.0:
        return var
    if var > -1e-6 * max(sill, 1.0):
        return 0.0
    raise NumericalFailure(f"kriging variance {var} is negative beyond rounding")


class _OkSystem:
    """Factorized bordered OK matrix for one set of training locations."""

    def __init__(self, train_locs: np.ndarray, model: VariogramModel):
        n = train_locs.shape[0]
        if n < 2:
            raise TooFewSamples("ordinary kriging needs at least 2 training points")
        d = pdist(train_locs)
        if d.size and d.min() == 0.0:
            raise SingularSystem("coincident training locations")
        self.n = n
        self.model = model
        a = np.zeros((n + 1, n + 1))
        a[:n, :n] = squareform(np.asarray(gamma(model, d)))
        a[n, :n] = 1.0
        a[:n, n] = 1.0
        self.matrix = a
        self.factor = self._factorize()

    def _factorize(self):
        a = self.matrix
        cond = np.linalg.cond(a)
        if not np.isfinite(cond) or cond > _COND_LIMIT:
            jitter = _JITTER * max(self.model.sill, 1.0)
            a = a.copy()
            a[: self.n, : self.n] += jitter * np.eye(self.n)
            cond = np.linalg.cond(a)
            if not np.isfinite(cond) or cond > _COND_LIMIT:
                raise SingularSystem(
                    f"kriging matrix condition {cond:.3g} after jitter"
                )
            self.matrix = a
        try:
            return lu_factor(a)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded above
            raise SingularSystem(str(exc)) from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        sol = lu_solve(self.factor, rhs)
        if not np.all(np.isfinite(sol)):
            raise NumericalFailure("non-finite kriging solution")
        return sol

    def inverse(self) -> np.ndarray:
        inv = lu_solve(self.factor, np.eye(self.n + 1))
        if not np.all(np.isfinite(inv)):
            raise NumericalFailure("non-finite kriging matrix inverse")
        return inv


def ok_predict(
    train_locs,
    train_vals,
    model: VariogramModel,
    query_locs,
) -> list[KrigingPrediction]:
    """Solve the ordinary kriging system for each query location.

    Weights sum to 1 by construction of the bordered system; the variance
    is the weighted semivariance to the query plus the Lagrange multiplier.
    A model with zero total sill describes a constant field, for which the
    mean of the observations with zero variance is returned.
    """
    locs = np.asarray(train_locs, dtype=float)
    vals = np.asarray(train_vals, dtype=float)
    queries = np.atleast_2d(np.asarray(query_locs, dtype=float))
    n = locs.shape[0]
    if n < 2:
        raise TooFewSamples("ordinary kriging needs at least 2 training points")
    if vals.shape[0] != n:
        raise ValueError("training values length mismatch")

    if model.sill == 0.0:
        w = np.full(n, 1.0 / n)
        mean = float(vals.mean())
        return [KrigingPrediction(mean, 0.0, 0.0, w.copy()) for _ in queries]

    system = _OkSystem(locs, model)
    dq = cdist(queries, locs)
    out = []
    for row in dq:
        rhs = np.empty(n + 1)
        rhs[:n] = np.asarray(gamma(model, row))
        rhs[n] = 1.0
        sol = system.solve(rhs)
        weights = sol[:n]
        psi = float(sol[n])
        mean = float(weights @ vals)
        var = _clamp_variance(float(weights @ rhs[:n]) + psi, model.sill)
        out.append(KrigingPrediction(mean, var, psi, weights))
    return out


def loo_ok_features(train_locs, train_vals, model: VariogramModel) -> np.ndarray:
    """Leave-one-out OK prediction and variance at every training point.

    Returns an (n, 2) array of (mean, variance) pairs. Row i is computed
    with observation i excluded and the supplied model held fixed, via the
    partitioned inverse of the full bordered matrix; the result matches an
    explicit refit on the n-1 subset. Row i's weight on observation i is
    identically zero, so perturbing y_i can never leak into row i.
    """
    locs = np.asarray(train_locs, dtype=float)
    vals = np.asarray(train_vals, dtype=float)
    n = locs.shape[0]
    if n < 3:
        raise TooFewSamples("leave-one-out features need at least 3 points")
    if vals.shape[0] != n:
        raise ValueError("training values length mismatch")

    if model.sill == 0.0:
        out = np.empty((n, 2))
        for i in range(n):
            out[i, 0] = np.delete(vals, i).mean()
            out[i, 1] = 0.0
        return out

    system = _OkSystem(locs, model)
    inv = system.inverse()
    diag = np.diag(inv)[:n]
    if np.any(diag == 0.0):
        raise NumericalFailure("zero diagonal in bordered inverse")

    # Held-out weights: lambda_k = -B[k, i] / B[i, i] for k != i, self weight 0.
    w = -inv[:n, :n].T / diag[:, None]
    np.fill_diagonal(w, 0.0)
    means = w @ vals
    variances = -1.0 / diag
    out = np.empty((n, 2))
    out[:, 0] = means
    out[:, 1] = [_clamp_variance(float(v), model.sill) for v in variances]
    return out
