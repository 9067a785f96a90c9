from .metrics import (
    PointMetrics,
    central_alphas,
    delta_qcp,
    piw,
    piw_normalize,
    point_metrics,
    qcp,
    r_squared,
)
from .spatial import (
    LocalMoranResult,
    classify_spatial_outliers,
    morans_i_global,
    morans_i_local,
    pearson_r_pvalue,
    sd_norm,
    skewness,
)
from .benchmark import (
    BenchmarkConfig,
    BenchmarkResult,
    DatasetConfig,
    load_config,
    run_benchmark,
    write_reports,
)

__all__ = [
    "PointMetrics",
    "central_alphas",
    "delta_qcp",
    "piw",
    "piw_normalize",
    "point_metrics",
    "qcp",
    "r_squared",
    "LocalMoranResult",
    "classify_spatial_outliers",
    "morans_i_global",
    "morans_i_local",
    "pearson_r_pvalue",
    "sd_norm",
    "skewness",
    "BenchmarkConfig",
    "BenchmarkResult",
    "DatasetConfig",
    "load_config",
    "run_benchmark",
    "write_reports",
]
