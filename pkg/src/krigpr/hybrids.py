"""Hybrid predictors: regression kriging, LOO regression kriging, stacking.

Regression kriging runs a regressor, krige's its training residuals and
adds the interpolated residual back to the test prediction; its variance
comes from the residual kriging system. The LOO variant kriges held-out
prediction errors instead, which keeps the variance from collapsing when
the regressor overfits (zero training residuals force a zero residual
sill, hence zero-width intervals, in plain RK).

Uncertainty from both RK variants is emitted as Gaussian quantiles around
the combined mean; stacking is point-only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import make_folds
from .errors import (
    EmptyVariogram,
    FitFailure,
    InsufficientBins,
    TooFewSamples,
)
from .features import Split
from .kriging import ok_predict
from .regressors import (
    TAU_GRID,
    QuantileForecast,
    gaussian_forecast,
    fit_predict as regressor_fit_predict,
)
from .variogram import VariogramModel, VariogramPolicy

_VARIOGRAM_ERRORS = (FitFailure, EmptyVariogram, InsufficientBins)


@dataclass(frozen=True)
class HybridPrediction:
    """Combined prediction with its decomposition; variance absent => stacking."""

    mean: float
    variance: float | None
    regressor_mean: float
    residual_correction: float


@dataclass(frozen=True)
class HybridOutcome:
    predictions: list[HybridPrediction]
    forecasts: list[QuantileForecast] | None
    residual_model: VariogramModel | None
    fallback_reason: str | None = None

    @property
    def means(self) -> np.ndarray:
        return np.array([p.mean for p in self.predictions])


def _regressor_train_test(regressor, split: Split, taus):
    """One backend call for in-sample and test forecasts."""
    stacked = np.vstack([split.train_features, split.test_features])
    forecasts = regressor_fit_predict(
        regressor, split.train_features, split.train_values, stacked, taus
    )
    n_tr = split.n_train
    return forecasts[:n_tr], forecasts[n_tr:]


def _krige_errors(
    errors: np.ndarray,
    split: Split,
    policy: VariogramPolicy,
    reg_test_means: np.ndarray,
    taus,
    reg_test_forecasts,
) -> HybridOutcome:
    """Krige an error field and add it to the regressor test means."""
    try:
        model = policy.fit(split.train_locations, errors)
    except _VARIOGRAM_ERRORS as exc:
        preds = [
            HybridPrediction(float(m), None, float(m), 0.0) for m in reg_test_means
        ]
        return HybridOutcome(
            predictions=preds,
            forecasts=reg_test_forecasts,
            residual_model=None,
            fallback_reason=f"residual variogram unavailable: {exc}",
        )

    kriged = ok_predict(split.train_locations, errors, model, split.test_locations)
    predictions = []
    forecasts = []
    for reg_mean, kp in zip(reg_test_means, kriged):
        mean = float(reg_mean) + kp.mean
        predictions.append(
            HybridPrediction(mean, kp.variance, float(reg_mean), kp.mean)
        )
        forecasts.append(gaussian_forecast(mean, np.sqrt(kp.variance), taus))
    return HybridOutcome(predictions, forecasts, model)


def regression_kriging(
    regressor,
    split: Split,
    variogram_policy: VariogramPolicy | None = None,
    taus=TAU_GRID,
) -> HybridOutcome:
    """Regressor + ordinary kriging of its training residuals.

    If the residual variogram cannot be fitted the pure regressor output is
    returned and ``fallback_reason`` is set.
    """
    policy = variogram_policy or VariogramPolicy()
    train_fc, test_fc = _regressor_train_test(regressor, split, taus)
    train_means = np.array([f.mean for f in train_fc])
    residuals = split.train_values - train_means
    test_means = np.array([f.mean for f in test_fc])
    return _krige_errors(residuals, split, policy, test_means, taus, test_fc)


def loo_regression_kriging(
    regressor,
    split: Split,
    variogram_policy: VariogramPolicy | None = None,
    taus=TAU_GRID,
) -> HybridOutcome:
    """Regression kriging on held-out errors from an inner LOO pass.

    Each training row's error comes from a regressor fitted without that
    row, so the kriged error field reflects true generalization error
    rather than training fit.
    """
    policy = variogram_policy or VariogramPolicy()
    n = split.n_train
    if n < 4:
        raise TooFewSamples("LOO regression kriging needs n >= 4")

    errors = np.empty(n)
    for i in range(n):
        keep = np.arange(n) != i
        fc = regressor_fit_predict(
            regressor,
            split.train_features[keep],
            split.train_values[keep],
            split.train_features[i : i + 1],
            taus,
        )
        errors[i] = split.train_values[i] - fc[0].mean

    _, test_fc = _regressor_train_test(regressor, split, taus)
    test_means = np.array([f.mean for f in test_fc])
    return _krige_errors(errors, split, policy, test_means, taus, test_fc)


@dataclass(frozen=True)
class StackOutcome:
    predictions: np.ndarray
    intercept: float
    weights: np.ndarray  # (ok, regressor)
    ridge_fallback: bool


def fit_linear_meta(y, base_columns) -> tuple[float, np.ndarray, bool]:
    """Least squares with intercept of y on base predictions.

    Collinear bases trip a ridge fallback (penalty 1e-8, relative to the
    Gram scale) instead of failing.
    """
    y = np.asarray(y, dtype=float)
    bases = np.column_stack(base_columns)
    design = np.column_stack([np.ones(len(y)), bases])
    gram = design.T @ design
    used_ridge = False
    if np.linalg.matrix_rank(design) < design.shape[1] or np.linalg.cond(gram) > 1e12:
        used_ridge = True
        gram = gram + 1e-8 * max(float(np.trace(gram)) / gram.shape[0], 1.0) * np.eye(
            gram.shape[0]
        )
    coef = np.linalg.solve(gram, design.T @ y)
    return float(coef[0]), coef[1:], used_ridge


def stack_ok_regressor(
    regressor,
    split: Split,
    variogram_policy: VariogramPolicy | None = None,
    seed: int = 0,
) -> StackOutcome:
    """Linear meta-model over out-of-fold OK and regressor predictions.

    Base predictions on the training rows come from an inner 3-fold CV; the
    meta-model is then applied to full-train base predictions at the test
    locations. Point predictions only.
    """
    policy = variogram_policy or VariogramPolicy()
    n = split.n_train
    if n < 9:
        raise TooFewSamples("stacking needs n >= 9 for the inner 3-fold CV")

    folds = make_folds(n, 3, seed)
    oof_ok = np.empty(n)
    oof_reg = np.empty(n)
    for f in range(3):
        tr, te = folds.train_indices(f), folds.test_indices(f)
        model = policy.fit(split.train_locations[tr], split.train_values[tr])
        kriged = ok_predict(
            split.train_locations[tr],
            split.train_values[tr],
            model,
            split.train_locations[te],
        )
        oof_ok[te] = [kp.mean for kp in kriged]
        fc = regressor_fit_predict(
            regressor,
            split.train_features[tr],
            split.train_values[tr],
            split.train_features[te],
        )
        oof_reg[te] = [q.mean for q in fc]

    intercept, weights, used_ridge = fit_linear_meta(
        split.train_values, [oof_ok, oof_reg]
    )

    full_model = policy.fit(split.train_locations, split.train_values)
    test_ok = np.array(
        [
            kp.mean
            for kp in ok_predict(
                split.train_locations,
                split.train_values,
                full_model,
                split.test_locations,
            )
        ]
    )
    test_reg = np.array(
        [
            q.mean
            for q in regressor_fit_predict(
                regressor,
                split.train_features,
                split.train_values,
                split.test_features,
            )
        ]
    )
    predictions = intercept + weights[0] * test_ok + weights[1] * test_reg
    return StackOutcome(predictions, intercept, weights, used_ridge)
