"""Command-line entry points.

    krigpr run -c config.json -o outdir      benchmark a config
    krigpr variogram --data f.csv ...        empirical bins + fitted model
    krigpr simulate --model spherical:0.1,0.9,40 --grid 20x20 -o field.csv
    krigpr report --predictions predictions.csv -o outdir
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .data import load_dataset
from .errors import KrigprError
from .evaluation.benchmark import load_config, run_benchmark, write_reports
from .evaluation.metrics import central_alphas, delta_qcp, piw, point_metrics, qcp
from .regressors import QuantileForecast
from .synth import FieldSpec, grid_locations, simulate_grf
from .variogram import VariogramModel, empirical_semivariogram, fit_variogram


def _parse_model(text: str) -> VariogramModel:
    """Parse family:nugget,psill,range (e.g. spherical:0.1,0.9,40)."""
    try:
        family, params = text.split(":")
        nugget, psill, rng = (float(v) for v in params.split(","))
    except ValueError:
        raise SystemExit(
            f"bad --model {text!r}; expected family:nugget,psill,range"
        ) from None
    return VariogramModel(family, nugget, psill, rng)


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        nx, ny = (int(v) for v in text.lower().split("x"))
        return nx, ny
    except ValueError:
        raise SystemExit(f"bad --grid {text!r}; expected NXxNY like 20x20") from None


def cmd_run(args) -> int:
    config = load_config(args.config)
    result = run_benchmark(config)
    write_reports(result, args.outdir, taus=config.taus)
    done = len(result.task_metrics)
    failed = len(result.failures)
    print(f"{done} task rows written to {args.outdir}; {failed} failures")
    for failure in result.failures:
        print(f"  FAILED {failure.dataset}/{failure.target}/{failure.method}: "
              f"{failure.error}", file=sys.stderr)
    return 1 if result.all_failed else 0


def cmd_variogram(args) -> int:
    schema = {"x": args.x, "y": args.y, "targets": [args.value], "features": []}
    ds = load_dataset(args.data, schema, delimiter=args.delimiter)
    values = ds.targets[args.value]
    ev = empirical_semivariogram(
        ds.locations, values, n_bins=args.bins, max_lag=args.max_lag
    )
    model = fit_variogram(ev, sample_variance=float(np.var(values)))

    out = open(args.output, "w", newline="") if args.output else sys.stdout
    writer = csv.writer(out)
    writer.writerow(
        ["row_type", "lag", "semivariance", "pair_count",
         "family", "nugget", "partial_sill", "range"]
    )
    for lag, semi, count in zip(ev.lag_centers, ev.semivariances, ev.pair_counts):
        writer.writerow(["bin", repr(float(lag)), repr(float(semi)), int(count),
                         "", "", "", ""])
    writer.writerow(
        ["model", "", "", "", model.family, repr(model.nugget),
         repr(model.partial_sill), repr(model.range_)]
    )
    if args.output:
        out.close()
        print(f"wrote {ev.n_bins} bins and fitted {model.family} model "
              f"to {args.output}")
    return 0


def cmd_simulate(args) -> int:
    nx, ny = _parse_grid(args.grid)
    spec = FieldSpec(
        model=_parse_model(args.model),
        locations=grid_locations(nx, ny, spacing=args.spacing),
        seed=args.seed,
        mean=args.mean,
        noise_sd=args.noise_sd,
    )
    values = simulate_grf(spec)
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "value"])
        for (x, y), v in zip(spec.locations, values):
            writer.writerow([repr(float(x)), repr(float(y)), repr(float(v))])
    print(f"wrote {len(values)} simulated values to {args.output}")
    return 0


def cmd_report(args) -> int:
    """Recompute metric tables from a predictions dump."""
    frame = pd.read_csv(args.predictions)
    tau_cols = sorted(
        (c for c in frame.columns if c.startswith("q_")),
        key=lambda c: float(c[2:]),
    )
    taus = [float(c[2:]) for c in tau_cols]

    per_task_rows = []
    curve_rows = []
    for (dataset, target, method), group in frame.groupby(
        ["dataset", "target", "method"]
    ):
        y = group["y"].to_numpy(dtype=float)
        pred = group["pred"].to_numpy(dtype=float)
        pm = point_metrics(y, pred)
        row = {
            "dataset": dataset,
            "target": target,
            "method": method,
            "r2": pm.r2,
            "rmse": pm.rmse,
            "me": pm.me,
        }
        if tau_cols and not group[tau_cols].isna().any().any():
            forecasts = [
                QuantileForecast(mean=float(p), quantiles=dict(zip(taus, qrow)))
                for p, qrow in zip(pred, group[tau_cols].to_numpy(dtype=float))
            ]
            row["delta_qcp_pp"] = 100.0 * delta_qcp(y, forecasts, taus)
            alphas = central_alphas(taus)
            if alphas:
                row["piw_mean"] = float(
                    np.mean([piw(forecasts, a) for a in alphas])
                )
            for tau in taus:
                curve_rows.append(
                    {
                        "dataset": dataset,
                        "target": target,
                        "method": method,
                        "tau": tau,
                        "qcp": qcp(y, forecasts, tau),
                    }
                )
        per_task_rows.append(row)

    per_task = pd.DataFrame(per_task_rows)
    aggregate = (
        per_task.groupby("method")["r2"]
        .agg(mean_r2="mean", median_r2="median", sd_r2="std", n_tasks="count")
        .reset_index()
    )
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    aggregate.to_csv(outdir / "report.csv", index=False)
    per_task.to_csv(outdir / "per_task.csv", index=False)
    pd.DataFrame(curve_rows).to_csv(outdir / "qcp_curves.csv", index=False)
    print(f"recomputed {len(per_task)} task rows into {outdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="krigpr",
        description="Kriging-based spatial features, hybrids and benchmarking",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a benchmark config")
    p_run.add_argument("-c", "--config", required=True)
    p_run.add_argument("-o", "--outdir", default="krigpr_out")
    p_run.set_defaults(func=cmd_run)

    p_vg = sub.add_parser("variogram", help="empirical bins + fitted model")
    p_vg.add_argument("--data", required=True)
    p_vg.add_argument("--x", default="x")
    p_vg.add_argument("--y", default="y")
    p_vg.add_argument("--value", required=True)
    p_vg.add_argument("--bins", type=int, default=15)
    p_vg.add_argument("--max-lag", type=float, default=None)
    p_vg.add_argument("--delimiter", default=",")
    p_vg.add_argument("-o", "--output", default=None)
    p_vg.set_defaults(func=cmd_variogram)

    p_sim = sub.add_parser("simulate", help="simulate a Gaussian random field")
    p_sim.add_argument("--model", required=True,
                       help="family:nugget,psill,range e.g. spherical:0.1,0.9,40")
    p_sim.add_argument("--grid", required=True, help="NXxNY e.g. 20x20")
    p_sim.add_argument("--spacing", type=float, default=1.0)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--mean", type=float, default=0.0)
    p_sim.add_argument("--noise-sd", type=float, default=0.0)
    p_sim.add_argument("-o", "--output", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_rep = sub.add_parser("report", help="recompute tables from predictions.csv")
    p_rep.add_argument("--predictions", required=True)
    p_rep.add_argument("-o", "--outdir", default="krigpr_out")
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KrigprError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
