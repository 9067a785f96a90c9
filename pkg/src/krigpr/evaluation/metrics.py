"""Point-accuracy and probabilistic-calibration metrics.

R-squared follows the Nash-Sutcliffe form (1 - SSE / SST around the
observation mean) and can go negative. Quantile coverage counts ties as
covered (y <= q). Interval widths pair tau with 1 - tau, e.g. the
0.1/0.9 quantiles form the 80% interval (alpha = 0.2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import R2Undefined, ShapeMismatch, UnsupportedMetric


@dataclass(frozen=True)
class PointMetrics:
    me: float
    rmse: float
    r2: float | None


def r_squared(y, y_hat) -> float:
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0.0:
        raise R2Undefined("observations are constant")
    sse = float(((y - y_hat) ** 2).sum())
    return 1.0 - sse / sst


def point_metrics(y, y_hat) -> PointMetrics:
    """ME, RMSE and R2; R2 is None when the observations are constant."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise ShapeMismatch("y and y_hat length mismatch")
    if len(y) < 2:
        raise ShapeMismatch("need at least 2 observations")
    me = float((y - y_hat).mean())
    rmse = float(np.sqrt(((y - y_hat) ** 2).mean()))
    try:
        r2 = r_squared(y, y_hat)
    except R2Undefined:
        r2 = None
    return PointMetrics(me=me, rmse=rmse, r2=r2)


def qcp(y, forecasts, tau: float) -> float:
    """Fraction of observations at or below their tau-quantile."""
    if forecasts is None:
        raise UnsupportedMetric("this method emits point predictions only")
    y = np.asarray(y, dtype=float)
    if len(y) != len(forecasts):
        raise ShapeMismatch("y and forecasts length mismatch")
    quants = np.array([fc.quantile(tau) for fc in forecasts])
    return float((y <= quants).mean())


def delta_qcp(y, forecasts, taus=None) -> float:
    """Mean |QCP(tau) - tau| over the grid (a fraction; x100 for display)."""
    if forecasts is None:
        raise UnsupportedMetric("this method emits point predictions only")
    if taus is None:
        taus = forecasts[0].taus
    devs = [abs(qcp(y, forecasts, tau) - tau) for tau in taus]
    return float(np.mean(devs))


def central_alphas(taus) -> tuple[float, ...]:
    """Error rates of the central intervals the tau grid can form."""
    taus = sorted(float(t) for t in taus)
    out = []
    for t in taus:
        if t >= 0.5:
            break
        if any(abs(u - (1.0 - t)) <= 1e-12 for u in taus):
            out.append(round(2.0 * t, 12))
    return tuple(out)


def piw(forecasts, alpha: float) -> float:
    """Mean width of the central (1 - alpha) prediction interval."""
    if forecasts is None:
        raise UnsupportedMetric("this method emits point predictions only")
    lo, hi = alpha / 2.0, 1.0 - alpha / 2.0
    widths = [fc.quantile(hi) - fc.quantile(lo) for fc in forecasts]
    return float(np.mean(widths))


def piw_normalize(widths_by_method: dict[str, float]) -> tuple[dict[str, float], bool]:
    """Min-max normalize widths across methods for one prediction task.

    Returns (normalized, degenerate). With fewer than two methods the raw
    widths come back flagged; methods with identical widths all map to 0.
    """
    if len(widths_by_method) < 2:
        return dict(widths_by_method), True
    values = np.array(list(widths_by_method.values()), dtype=float)
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return {m: 0.0 for m in widths_by_method}, False
    return (
        {m: (w - lo) / (hi - lo) for m, w in widths_by_method.items()},
        False,
    )
