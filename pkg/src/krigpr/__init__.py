"""Kriging-based spatial feature engineering and benchmark tooling."""

__version__ = "0.1.0"

from . import errors, evaluation
from .data import (
    Dataset,
    FoldAssignment,
    fit_pca,
    load_dataset,
    load_folds,
    make_folds,
    pca_reduce,
    write_dataset,
)
from .features import (
    FeatureAugmentation,
    FeatureMethod,
    Split,
    augment,
    idw_interpolate,
    knn_matrix_features,
    tune_k,
)
from .hybrids import (
    HybridOutcome,
    HybridPrediction,
    StackOutcome,
    loo_regression_kriging,
    regression_kriging,
    stack_ok_regressor,
)
from .kriging import KrigingPrediction, loo_ok_features, ok_predict
from .regressors import (
    TAU_GRID,
    ExternalBackend,
    QuantileForecast,
    RegressorSpec,
    fit_predict,
    gaussian_forecast,
    make_regressor,
    monotonize,
)
from .synth import FieldSpec, KprTestbed, grid_locations, make_kpr_testbed, simulate_grf
from .variogram import (
    EmpiricalVariogram,
    VariogramModel,
    VariogramPolicy,
    empirical_semivariogram,
    fit_variogram,
    gamma,
)

__all__ = [
    "errors",
    "evaluation",
    "Dataset",
    "FoldAssignment",
    "fit_pca",
    "load_dataset",
    "load_folds",
    "make_folds",
    "pca_reduce",
    "write_dataset",
    "FeatureAugmentation",
    "FeatureMethod",
    "Split",
    "augment",
    "idw_interpolate",
    "knn_matrix_features",
    "tune_k",
    "HybridOutcome",
    "HybridPrediction",
    "StackOutcome",
    "loo_regression_kriging",
    "regression_kriging",
    "stack_ok_regressor",
    "KrigingPrediction",
    "loo_ok_features",
    "ok_predict",
    "TAU_GRID",
    "ExternalBackend",
    "QuantileForecast",
    "RegressorSpec",
    "fit_predict",
    "gaussian_forecast",
    "make_regressor",
    "monotonize",
    "FieldSpec",
    "KprTestbed",
    "grid_locations",
    "make_kpr_testbed",
    "simulate_grf",
    "EmpiricalVariogram",
    "VariogramModel",
    "VariogramPolicy",
    "empirical_semivariogram",
    "fit_variogram",
    "gamma",
]
