from __future__ import annotations

import json

import numpy as np
import pandas as pd
import pytest

from krigpr.data import Dataset, write_dataset
from krigpr.evaluation import (
    BenchmarkConfig,
    DatasetConfig,
    load_config,
    run_benchmark,
    write_reports,
)
from krigpr.evaluation.metrics import point_metrics
from krigpr.regressors import RegressorSpec
from krigpr.synth import make_kpr_testbed


def synth_dataset(seed, n=60, **kwargs) -> Dataset:
    tb = make_kpr_testbed(seed, n=n, **kwargs)
    return Dataset(
        id=f"synth{seed}",
        locations=tb.locations,
        targets={"soc": tb.target},
        features=tb.features,
        feature_names=tb.feature_names,
        metadata={"pss_count": seed % 4, "sampling_design": "random"},
    )


@pytest.fixture
def dataset_dir(tmp_path):
    configs = []
    for seed in range(3):
        ds = synth_dataset(seed, n=50)
        path = tmp_path / f"ds{seed}.csv"
        write_dataset(ds, path)
        configs.append(
            DatasetConfig(
                id=ds.id,
                path=str(path),
                schema={
                    "x": "x",
                    "y": "y",
                    "targets": ["soc"],
                    "features": ["f1", "f2", "f3"],
                },
                pss_count=seed % 4,
            )
        )
    return tmp_path, configs


def small_config(configs, methods, **kwargs) -> BenchmarkConfig:
    defaults = dict(
        datasets=configs,
        methods=methods,
        regressor=RegressorSpec("linear_gaussian"),
        folds_k=5,
        folds_seed=1,
    )
    defaults.update(kwargs)
    return BenchmarkConfig(**defaults)


class TestRunBenchmark:
    def test_linear_task_reg_r2_high(self, tmp_path):
        # Exactly linear noiseless target: the linear regressor must hit
        # R2 >= 0.999.
        ds = synth_dataset(5, n=60, grf_sill=0.0, noise_sd=0.0)
        path = tmp_path / "lin.csv"
        write_dataset(ds, path)
        cfg = small_config(
            [
                DatasetConfig(
                    id="lin",
                    path=str(path),
                    schema={
                        "x": "x",
                        "y": "y",
                        "targets": ["soc"],
                        "features": ["f1", "f2", "f3"],
                    },
                )
            ],
            ["reg"],
        )
        result = run_benchmark(cfg)
        assert not result.failures
        assert result.task_metrics[0].r2 >= 0.999

    def test_full_method_set_structure(self, dataset_dir):
        _, configs = dataset_dir
        methods = ["ok", "reg", "rk", "reg+kpr", "stack"]
        result = run_benchmark(small_config(configs, methods))
        assert not result.failures
        assert len(result.task_metrics) == 3 * len(methods)
        for row in result.task_metrics:
            if row.method == "stack":
                assert row.qcp_by_tau is None
                assert row.delta_qcp is None
                assert "point predictions only" in row.warnings
            else:
                assert row.qcp_by_tau is not None
                assert 0.0 <= row.delta_qcp <= 1.0
        for m in methods:
            assert m in result.aggregates
            assert result.aggregates[m]["n_tasks"] == 3.0

    def test_pooled_metrics_equal_concatenated_folds(self, dataset_dir):
        _, configs = dataset_dir
        result = run_benchmark(small_config(configs, ["ok"]))
        row = result.task_metrics[0]
        preds = [
            p
            for p in result.predictions
            if p.dataset == row.dataset and p.method == "ok"
        ]
        y = np.empty(len(preds))
        yhat = np.empty(len(preds))
        for p in preds:
            y[p.row] = p.y
            yhat[p.row] = p.pred
        pm = point_metrics(y, yhat)
        assert row.rmse == pytest.approx(pm.rmse)
        assert row.r2 == pytest.approx(pm.r2)
        assert row.me == pytest.approx(pm.me)

    def test_piw_norm_endpoints_across_methods(self, dataset_dir):
        _, configs = dataset_dir
        result = run_benchmark(small_config(configs, ["ok", "reg", "rk"]))
        for ds in ("synth0", "synth1", "synth2"):
            norms = [
                t.piw_norm
                for t in result.task_metrics
                if t.dataset == ds and t.piw_norm is not None
            ]
            assert min(norms) == 0.0
            assert max(norms) == 1.0

    def test_determinism(self, dataset_dir):
        _, configs = dataset_dir
        cfg = small_config(configs, ["reg+kpr"])
        a = run_benchmark(cfg)
        b = run_benchmark(cfg)
        for ra, rb in zip(a.task_metrics, b.task_metrics):
            assert ra.r2 == rb.r2
            assert ra.rmse == rb.rmse

    def test_characteristics_and_correlations(self, dataset_dir):
        _, configs = dataset_dir
        result = run_benchmark(
            small_config(configs, ["ok", "reg", "reg+kpr"])
        )
        assert len(result.characteristics) == 3
        for c in result.characteristics:
            assert c.sample_size == 50
            assert c.moran_i_y is not None
            assert 0.0 <= c.spatial_outlier_freq <= 1.0
            assert c.sd_norm is not None
            assert "reg+kpr-reg" in c.delta_r2
        assert result.correlations
        for corr in result.correlations:
            assert -1.0 <= corr.r <= 1.0
            assert 0.0 <= corr.p <= 1.0

    def test_external_fold_file(self, dataset_dir, tmp_path):
        _, configs = dataset_dir
        fold_path = tmp_path / "folds.txt"
        fold_path.write_text("\n".join(str(i % 5) for i in range(50)) + "\n")
        cfgs = [
            DatasetConfig(
                id=configs[0].id,
                path=configs[0].path,
                schema=configs[0].schema,
                fold_file=str(fold_path),
            )
        ]
        result = run_benchmark(small_config(cfgs, ["ok"]))
        assert not result.failures
        folds = {p.fold for p in result.predictions}
        assert folds == set(range(5))

    def test_task_failure_isolated(self, dataset_dir, tmp_path):
        _, configs = dataset_dir
        fold_path = tmp_path / "bad_folds.txt"
        fold_path.write_text("0\n1\n")  # wrong length
        bad = DatasetConfig(
            id="broken",
            path=configs[0].path,
            schema=configs[0].schema,
            fold_file=str(fold_path),
        )
        result = run_benchmark(small_config([bad, configs[1]], ["ok"]))
        assert len(result.failures) == 1
        assert result.failures[0].dataset == "broken"
        assert len(result.task_metrics) == 1
        assert not result.all_failed

    def test_pca_block_reduction(self, tmp_path, rng):
        # Ten collinear spectral columns reduce to a handful of components
        # refit inside each training fold.
        tb = make_kpr_testbed(9, n=50)
        base = rng.standard_normal((50, 2))
        mixing = rng.standard_normal((2, 10))
        spectral = base @ mixing + 0.01 * rng.standard_normal((50, 10))
        names = tuple(f"nir{j}" for j in range(10))
        ds = Dataset(
            id="spec",
            locations=tb.locations,
            targets={"soc": tb.target},
            features=spectral,
            feature_names=names,
        )
        path = tmp_path / "spec.csv"
        write_dataset(ds, path)
        cfg = small_config(
            [
                DatasetConfig(
                    id="spec",
                    path=str(path),
                    schema={
                        "x": "x",
                        "y": "y",
                        "targets": ["soc"],
                        "features": list(names),
                    },
                    pca={"columns": list(names), "n_components": 4},
                )
            ],
            ["reg"],
        )
        result = run_benchmark(cfg)
        assert not result.failures


class TestReportsAndConfig:
    def test_write_reports_emits_all_files(self, dataset_dir, tmp_path):
        _, configs = dataset_dir
        result = run_benchmark(small_config(configs, ["ok", "reg", "stack"]))
        outdir = tmp_path / "out"
        write_reports(result, outdir)
        for name in (
            "report.csv",
            "per_task.csv",
            "characteristics.csv",
            "predictions.csv",
            "qcp_curves.csv",
        ):
            assert (outdir / name).exists(), name
        report = pd.read_csv(outdir / "report.csv")
        assert set(report["method"]) == {"ok", "reg", "stack"}
        curves = pd.read_csv(outdir / "qcp_curves.csv")
        assert "stack" not in set(curves["method"])
        per_task = pd.read_csv(outdir / "per_task.csv")
        assert len(per_task) == 9

    def test_load_config_round_trip(self, dataset_dir, tmp_path):
        _, configs = dataset_dir
        raw = {
            "datasets": [
                {
                    "id": c.id,
                    "path": c.path,
                    "schema": c.schema,
                    "pss_count": c.pss_count,
                }
                for c in configs
            ],
            "methods": ["ok", "reg"],
            "regressor": {"kind": "knn_quantile", "k": 4},
            "folds": {"k": 5, "seed": 3},
            "variogram": {"n_bins": 12},
            "k_grid": [2, 6],
            "seed": 11,
        }
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps(raw))
        cfg = load_config(cfg_path)
        assert cfg.folds_k == 5
        assert cfg.regressor.kind == "knn_quantile"
        assert cfg.k_grid == (2, 3, 4, 5, 6)
        assert cfg.variogram.n_bins == 12
        result = run_benchmark(cfg)
        assert not result.failures
