"""Cross-validated benchmark harness.

For every (dataset, target, method) task the harness fits everything that
can leak (variogram, PCA, neighbor counts, spatial features) inside the
training fold only, predicts the held-out fold, and pools predictions over
folds before computing metrics, so each task yields one metric row. Task
failures are recorded and skipped rather than aborting the run.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ..data import Dataset, fit_pca, load_dataset, load_folds, make_folds
from ..errors import KrigprError, ShapeMismatch
from ..features import DEFAULT_K_GRID, FeatureMethod, Split, augment, tune_k
from ..hybrids import loo_regression_kriging, regression_kriging, stack_ok_regressor
from ..kriging import ok_predict
from ..regressors import (
    TAU_GRID,
    ExternalBackend,
    RegressorSpec,
    gaussian_forecast,
    make_regressor,
)
from ..variogram import VariogramPolicy
from .metrics import central_alphas, delta_qcp, piw, piw_normalize, point_metrics, qcp
from .spatial import (
    classify_spatial_outliers,
    morans_i_global,
    morans_i_local,
    pearson_r_pvalue,
    sd_norm,
    skewness,
)

logger = logging.getLogger(__name__)

METHODS = (
    "ok",
    "reg",
    "reg+kpr",
    "reg+kpr_novar",
    "reg+idwpr",
    "reg+knnpr",
    "reg+knnmatrix",
    "reg+edf",
    "reg+coords",
    "rk",
    "loo_rk",
    "stack",
)

_TUNED_AUGMENTATIONS = ("idwpr", "knnpr", "knnmatrix")


@dataclass(frozen=True)
class DatasetConfig:
    id: str
    path: str
    schema: dict
    pss_count: int = 0
    sampling_design: str = "unknown"
    pca: dict | None = None  # {"columns": [...], "n_components": int}
    fold_file: str | None = None


@dataclass(frozen=True)
class BenchmarkConfig:
    datasets: list[DatasetConfig]
    methods: list[str]
    regressor: RegressorSpec
    targets: list[str] | None = None
    folds_k: int = 10
    folds_seed: int = 42
    taus: tuple[float, ...] = TAU_GRID
    idw_power: float = 2.0
    k_grid: tuple[int, ...] = DEFAULT_K_GRID
    variogram: VariogramPolicy = field(default_factory=VariogramPolicy)
    seed: int = 0
    delta_pairs: list[tuple[str, str]] | None = None

    def __post_init__(self):
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; choose from {METHODS}")

    def resolved_delta_pairs(self) -> list[tuple[str, str]]:
        if self.delta_pairs is not None:
            return [tuple(p) for p in self.delta_pairs]
        pairs = []
        for a, b in (("reg+kpr", "reg"), ("reg", "ok"), ("rk", "reg")):
            if a in self.methods and b in self.methods:
                pairs.append((a, b))
        return pairs


def load_config(path) -> BenchmarkConfig:
    """Parse a JSON config; dataset and fold paths resolve next to it."""
    path = Path(path)
    raw = json.loads(path.read_text())
    base = path.parent

    datasets = []
    for entry in raw["datasets"]:
        fold_file = entry.get("fold_file")
        datasets.append(
            DatasetConfig(
                id=entry["id"],
                path=str(base / entry["path"]),
                schema=entry["schema"],
                pss_count=int(entry.get("pss_count", 0)),
                sampling_design=entry.get("sampling_design", "unknown"),
                pca=entry.get("pca"),
                fold_file=str(base / fold_file) if fold_file else None,
            )
        )

    reg = raw["regressor"]
    spec = RegressorSpec(
        kind=reg["kind"],
        k=int(reg.get("k", 5)),
        command=tuple(reg.get("command", ())),
        options=reg.get("options", {}),
    )

    folds = raw.get("folds", {})
    vg = raw.get("variogram", {})
    k_grid = raw.get("k_grid")
    return BenchmarkConfig(
        datasets=datasets,
        methods=list(raw["methods"]),
        regressor=spec,
        targets=raw.get("targets"),
        folds_k=int(folds.get("k", 10)),
        folds_seed=int(folds.get("seed", 42)),
        taus=tuple(raw.get("taus", TAU_GRID)),
        idw_power=float(raw.get("idw_power", 2.0)),
        k_grid=tuple(range(k_grid[0], k_grid[1] + 1)) if k_grid else DEFAULT_K_GRID,
        variogram=VariogramPolicy(
            n_bins=int(vg.get("n_bins", 15)), max_lag=vg.get("max_lag")
        ),
        seed=int(raw.get("seed", 0)),
        delta_pairs=[tuple(p) for p in raw["delta_pairs"]]
        if "delta_pairs" in raw
        else None,
    )


@dataclass
class TaskMetrics:
    dataset: str
    target: str
    method: str
    me: float
    rmse: float
    r2: float | None
    qcp_by_tau: dict[float, float] | None
    delta_qcp: float | None
    piw_by_alpha: dict[float, float] | None
    piw_mean: float | None
    piw_norm: float | None = None
    piw_norm_degenerate: bool = False
    warnings: tuple[str, ...] = ()


@dataclass
class TaskCharacteristics:
    dataset: str
    target: str
    sample_size: int
    pss_count: int
    moran_i_y: float | None
    var_local_moran: float | None
    spatial_outlier_freq: float | None
    sd: float
    skewness: float | None
    sd_norm: float | None = None
    sd_norm_degenerate: bool = False
    moran_i_errors: dict[str, float | None] = field(default_factory=dict)
    r2_by_method: dict[str, float | None] = field(default_factory=dict)
    delta_r2: dict[str, float | None] = field(default_factory=dict)


@dataclass(frozen=True)
class CorrelationRow:
    characteristic: str
    outcome: str
    r: float
    p: float


@dataclass
class PredictionRecord:
    dataset: str
    target: str
    method: str
    fold: int
    row: int
    y: float
    pred: float
    quantiles: dict[float, float] | None


@dataclass(frozen=True)
class TaskFailure:
    dataset: str
    target: str
    method: str
    error: str


@dataclass
class BenchmarkResult:
    task_metrics: list[TaskMetrics]
    aggregates: dict[str, dict[str, float]]
    characteristics: list[TaskCharacteristics]
    correlations: list[CorrelationRow]
    predictions: list[PredictionRecord]
    failures: list[TaskFailure]

    @property
    def all_failed(self) -> bool:
        return not self.task_metrics and bool(self.failures)


def _fold_features(ds: Dataset, pca_cfg: dict | None, tr, te):
    """Per-fold feature matrices; PCA blocks refit on the training rows."""
    if not pca_cfg:
        return ds.features[tr], ds.features[te]
    cols = list(pca_cfg["columns"])
    idx = [ds.feature_names.index(c) for c in cols]
    passthrough = [j for j in range(ds.p) if j not in idx]
    model = fit_pca(ds.features[tr][:, idx], int(pca_cfg["n_components"]))
    train = np.hstack(
        [ds.features[tr][:, passthrough], model.transform(ds.features[tr][:, idx])]
    )
    test = np.hstack(
        [ds.features[te][:, passthrough], model.transform(ds.features[te][:, idx])]
    )
    return train, test


def _run_fold_method(method, split, regressor, cfg, fold_seed):
    """One method on one fold: (means, forecasts|None, warnings)."""
    warnings = []
    if method == "ok":
        model = cfg.variogram.fit(split.train_locations, split.train_values)
        preds = ok_predict(
            split.train_locations, split.train_values, model, split.test_locations
        )
        forecasts = [
            gaussian_forecast(p.mean, np.sqrt(p.variance), cfg.taus) for p in preds
        ]
        return np.array([p.mean for p in preds]), forecasts, warnings

    if method == "rk" or method == "loo_rk":
        run = regression_kriging if method == "rk" else loo_regression_kriging
        outcome = run(regressor, split, cfg.variogram, cfg.taus)
        if outcome.fallback_reason:
            warnings.append(outcome.fallback_reason)
        return outcome.means, outcome.forecasts, warnings

    if method == "stack":
        outcome = stack_ok_regressor(regressor, split, cfg.variogram, seed=fold_seed)
        if outcome.ridge_fallback:
            warnings.append("collinear stacking bases; ridge fallback")
        warnings.append("point predictions only")
        return outcome.predictions, None, warnings

    # reg / reg+<augmentation>
    aug_name = "none" if method == "reg" else method.split("+", 1)[1]
    fm = FeatureMethod(aug_name, power=cfg.idw_power)
    if aug_name in _TUNED_AUGMENTATIONS:
        k = tune_k(
            split.train_locations,
            split.train_values,
            split.train_features,
            fm,
            regressor,
            k_grid=cfg.k_grid,
            seed=fold_seed,
        )
        fm = FeatureMethod(aug_name, k=k, power=cfg.idw_power)
        warnings.append(f"tuned k={k}")
    aug = augment(split, fm, variogram_policy=cfg.variogram)
    forecasts = regressor.fit_predict(
        aug.train_features, split.train_values, aug.test_features, cfg.taus
    )
    return np.array([fc.mean for fc in forecasts]), forecasts, warnings


def _task_characteristics(ds: Dataset, target: str, y: np.ndarray) -> TaskCharacteristics:
    moran = var_local = outlier_freq = skw = None
    try:
        moran = morans_i_global(ds.locations, y)
        local = morans_i_local(ds.locations, y)
        var_local = float(np.var(local.local_i))
        _, outlier_freq = classify_spatial_outliers(ds.locations, y)
    except KrigprError as exc:
        logger.warning("Moran characteristics unavailable for %s/%s: %s", ds.id, target, exc)
    try:
        skw = skewness(y)
    except KrigprError:
        pass
    return TaskCharacteristics(
        dataset=ds.id,
        target=target,
        sample_size=ds.n,
        pss_count=ds.pss_count,
        moran_i_y=moran,
        var_local_moran=var_local,
        spatial_outlier_freq=outlier_freq,
        sd=float(np.std(y, ddof=1)),
        skewness=skw,
    )


def run_benchmark(config: BenchmarkConfig) -> BenchmarkResult:
    regressor = make_regressor(config.regressor)
    try:
        return _run_benchmark(config, regressor)
    finally:
        if isinstance(regressor, ExternalBackend):
            regressor.close()


def _run_benchmark(config: BenchmarkConfig, regressor) -> BenchmarkResult:
    task_metrics: list[TaskMetrics] = []
    characteristics: list[TaskCharacteristics] = []
    predictions: list[PredictionRecord] = []
    failures: list[TaskFailure] = []

    for ds_cfg in config.datasets:
        try:
            ds = load_dataset(
                ds_cfg.path,
                ds_cfg.schema,
                dataset_id=ds_cfg.id,
                metadata={
                    "pss_count": ds_cfg.pss_count,
                    "sampling_design": ds_cfg.sampling_design,
                },
            )
            if ds_cfg.fold_file:
                folds = load_folds(ds_cfg.fold_file)
                if folds.n != ds.n:
                    raise ShapeMismatch(
                        f"fold file length {folds.n} != dataset size {ds.n}"
                    )
            else:
                folds = make_folds(ds.n, config.folds_k, config.folds_seed)
        except Exception as exc:
            logger.error("dataset %s unusable: %s", ds_cfg.id, exc)
            for target in ds_cfg.schema.get("targets", ["?"]):
                for method in config.methods:
                    failures.append(TaskFailure(ds_cfg.id, target, method, str(exc)))
            continue

        targets = config.targets or list(ds.targets)
        for target in targets:
            if target not in ds.targets:
                continue
            y = ds.targets[target]
            chars = _task_characteristics(ds, target, y)
            characteristics.append(chars)

            method_rows: dict[str, TaskMetrics] = {}
            for method in config.methods:
                try:
                    row, preds = _run_task(
                        config, regressor, ds, ds_cfg, folds, target, y, method
                    )
                except Exception as exc:  # isolate per-task failures
                    logger.error("task %s/%s/%s failed: %s", ds.id, target, method, exc)
                    failures.append(TaskFailure(ds.id, target, method, str(exc)))
                    continue
                method_rows[method] = row
                predictions.extend(preds)
                chars.r2_by_method[method] = row.r2
                by_row = np.empty(ds.n)
                for p in preds:
                    by_row[p.row] = p.pred
                try:
                    chars.moran_i_errors[method] = morans_i_global(
                        ds.locations, y - by_row
                    )
                except KrigprError:
                    chars.moran_i_errors[method] = None

            widths = {
                m: row.piw_mean
                for m, row in method_rows.items()
                if row.piw_mean is not None
            }
            normed, degenerate = piw_normalize(widths)
            for m, row in method_rows.items():
                if m in normed:
                    row.piw_norm = normed[m]
                    row.piw_norm_degenerate = degenerate
            for a, b in config.resolved_delta_pairs():
                ra = chars.r2_by_method.get(a)
                rb = chars.r2_by_method.get(b)
                chars.delta_r2[f"{a}-{b}"] = (
                    ra - rb if ra is not None and rb is not None else None
                )
            task_metrics.extend(method_rows.values())

    _normalize_sds(characteristics)
    aggregates = _aggregate(task_metrics, config.methods)
    correlations = _correlate(characteristics, config)
    return BenchmarkResult(
        task_metrics=task_metrics,
        aggregates=aggregates,
        characteristics=characteristics,
        correlations=correlations,
        predictions=predictions,
        failures=failures,
    )


def _run_task(config, regressor, ds, ds_cfg, folds, target, y, method):
    n = ds.n
    pooled_pred = np.empty(n)
    pooled_fc: list | None = [None] * n
    records = []
    warnings: list[str] = []

    for f in range(folds.k):
        tr, te = folds.train_indices(f), folds.test_indices(f)
        train_x, test_x = _fold_features(ds, ds_cfg.pca, tr, te)
        split = Split(ds.locations[tr], y[tr], train_x, ds.locations[te], test_x)
        means, forecasts, fold_warnings = _run_fold_method(
            method, split, regressor, config, config.seed + f
        )
        warnings.extend(fold_warnings)
        pooled_pred[te] = means
        if forecasts is None:
            pooled_fc = None
        elif pooled_fc is not None:
            for j, idx in enumerate(te):
                pooled_fc[idx] = forecasts[j]
        for j, idx in enumerate(te):
            records.append(
                PredictionRecord(
                    dataset=ds.id,
                    target=target,
                    method=method,
                    fold=f,
                    row=int(idx),
                    y=float(y[idx]),
                    pred=float(means[j]),
                    quantiles=None if forecasts is None else forecasts[j].quantiles,
                )
            )

    pm = point_metrics(y, pooled_pred)
    qcp_by_tau = dq = piw_by_alpha = piw_mean = None
    if pooled_fc is not None:
        qcp_by_tau = {t: qcp(y, pooled_fc, t) for t in config.taus}
        dq = delta_qcp(y, pooled_fc, config.taus)
        alphas = central_alphas(config.taus)
        piw_by_alpha = {a: piw(pooled_fc, a) for a in alphas}
        piw_mean = float(np.mean(list(piw_by_alpha.values()))) if piw_by_alpha else None

    row = TaskMetrics(
        dataset=ds.id,
        target=target,
        method=method,
        me=pm.me,
        rmse=pm.rmse,
        r2=pm.r2,
        qcp_by_tau=qcp_by_tau,
        delta_qcp=dq,
        piw_by_alpha=piw_by_alpha,
        piw_mean=piw_mean,
        warnings=tuple(dict.fromkeys(warnings)),
    )
    return row, records


def _normalize_sds(characteristics: list[TaskCharacteristics]) -> None:
    """Min-max the target SD per soil property across datasets."""
    by_target: dict[str, list[TaskCharacteristics]] = {}
    for c in characteristics:
        by_target.setdefault(c.target, []).append(c)
    for rows in by_target.values():
        values = sd_norm([c.sd for c in rows])
        degenerate = len(rows) < 3
        for c, v in zip(rows, values):
            c.sd_norm = None if np.isnan(v) else float(v)
            c.sd_norm_degenerate = degenerate


def _aggregate(task_metrics, methods) -> dict[str, dict[str, float]]:
    out = {}
    for m in methods:
        r2s = [t.r2 for t in task_metrics if t.method == m and t.r2 is not None]
        dqs = [t.delta_qcp for t in task_metrics if t.method == m and t.delta_qcp is not None]
        piws = [t.piw_norm for t in task_metrics if t.method == m and t.piw_norm is not None]
        if not r2s:
            continue
        stats = {
            "n_tasks": float(len(r2s)),
            "mean_r2": float(np.mean(r2s)),
            "median_r2": float(np.median(r2s)),
            "sd_r2": float(np.std(r2s, ddof=1)) if len(r2s) > 1 else 0.0,
        }
        if dqs:
            stats["mean_delta_qcp"] = float(np.mean(dqs))
            stats["median_delta_qcp"] = float(np.median(dqs))
        if piws:
            stats["mean_piw_norm"] = float(np.mean(piws))
            stats["median_piw_norm"] = float(np.median(piws))
        out[m] = stats
    return out


def _correlate(characteristics, config) -> list[CorrelationRow]:
    """Pearson r + p of every characteristic against every outcome column."""
    if len(characteristics) < 3:
        return []
    char_cols: dict[str, list[float | None]] = {
        "sample_size": [float(c.sample_size) for c in characteristics],
        "pss_count": [float(c.pss_count) for c in characteristics],
        "moran_i_y": [c.moran_i_y for c in characteristics],
        "var_local_moran": [c.var_local_moran for c in characteristics],
        "spatial_outlier_freq": [c.spatial_outlier_freq for c in characteristics],
        "sd_norm": [c.sd_norm for c in characteristics],
        "skewness": [c.skewness for c in characteristics],
    }
    for m in config.methods:
        char_cols[f"moran_i_errors_{m}"] = [
            c.moran_i_errors.get(m) for c in characteristics
        ]
        char_cols[f"r2_{m}"] = [c.r2_by_method.get(m) for c in characteristics]

    outcome_cols: dict[str, list[float | None]] = {
        f"r2_{m}": [c.r2_by_method.get(m) for c in characteristics]
        for m in config.methods
    }
    for a, b in config.resolved_delta_pairs():
        key = f"{a}-{b}"
        outcome_cols[f"delta_r2_{key}"] = [c.delta_r2.get(key) for c in characteristics]

    rows = []
    for cname, cvals in char_cols.items():
        for oname, ovals in outcome_cols.items():
            if cname == oname:
                continue
            pairs = [
                (x, yv)
                for x, yv in zip(cvals, ovals)
                if x is not None and yv is not None
            ]
            if len(pairs) < 3:
                continue
            a = np.array([p[0] for p in pairs])
            b = np.array([p[1] for p in pairs])
            try:
                r, p = pearson_r_pvalue(a, b)
            except KrigprError:
                continue
            rows.append(CorrelationRow(cname, oname, r, p))
    return rows


def write_reports(result: BenchmarkResult, outdir, taus=TAU_GRID) -> None:
    """Write report.csv, per_task.csv, characteristics.csv, predictions.csv
    and qcp_curves.csv under ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    agg_rows = [
        {"method": m, **stats} for m, stats in result.aggregates.items()
    ]
    pd.DataFrame(agg_rows).to_csv(outdir / "report.csv", index=False)

    task_rows = []
    for t in result.task_metrics:
        task_rows.append(
            {
                "dataset": t.dataset,
                "target": t.target,
                "method": t.method,
                "r2": t.r2,
                "rmse": t.rmse,
                "me": t.me,
                "delta_qcp_pp": None if t.delta_qcp is None else 100.0 * t.delta_qcp,
                "piw_mean": t.piw_mean,
                "piw_norm": t.piw_norm,
                "piw_norm_degenerate": t.piw_norm_degenerate,
                "warnings": "; ".join(t.warnings),
            }
        )
    for f in result.failures:
        task_rows.append(
            {
                "dataset": f.dataset,
                "target": f.target,
                "method": f.method,
                "warnings": f"FAILED: {f.error}",
            }
        )
    pd.DataFrame(task_rows).to_csv(outdir / "per_task.csv", index=False)

    char_rows = []
    for c in result.characteristics:
        row = {
            "row_type": "task",
            "dataset": c.dataset,
            "target": c.target,
            "sample_size": c.sample_size,
            "pss_count": c.pss_count,
            "moran_i_y": c.moran_i_y,
            "var_local_moran": c.var_local_moran,
            "spatial_outlier_freq": c.spatial_outlier_freq,
            "sd": c.sd,
            "sd_norm": c.sd_norm,
            "sd_norm_degenerate": c.sd_norm_degenerate,
            "skewness": c.skewness,
        }
        for m, v in c.r2_by_method.items():
            row[f"r2_{m}"] = v
        for m, v in c.moran_i_errors.items():
            row[f"moran_i_errors_{m}"] = v
        for k, v in c.delta_r2.items():
            row[f"delta_r2_{k}"] = v
        char_rows.append(row)
    for corr in result.correlations:
        char_rows.append(
            {
                "row_type": "correlation",
                "characteristic": corr.characteristic,
                "outcome": corr.outcome,
                "r": corr.r,
                "p": corr.p,
            }
        )
    pd.DataFrame(char_rows).to_csv(outdir / "characteristics.csv", index=False)

    pred_rows = []
    for p in result.predictions:
        row = {
            "dataset": p.dataset,
            "target": p.target,
            "method": p.method,
            "fold": p.fold,
            "row": p.row,
            "y": repr(p.y),
            "pred": repr(p.pred),
        }
        if p.quantiles:
            for tau in sorted(p.quantiles):
                row[f"q_{tau}"] = repr(p.quantiles[tau])
        pred_rows.append(row)
    pd.DataFrame(pred_rows).to_csv(outdir / "predictions.csv", index=False)

    curve_rows = []
    for t in result.task_metrics:
        if not t.qcp_by_tau:
            continue
        for tau, cov in sorted(t.qcp_by_tau.items()):
            curve_rows.append(
                {
                    "dataset": t.dataset,
                    "target": t.target,
                    "method": t.method,
                    "tau": tau,
                    "qcp": cov,
                }
            )
    pd.DataFrame(curve_rows).to_csv(outdir / "qcp_curves.csv", index=False)
