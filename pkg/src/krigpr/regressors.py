"""Probabilistic regressors behind one fit-predict interface.

Two built-ins cover the benchmark without any external process: a ridge
linear model with Gaussian predictive quantiles and a k-nearest-neighbor
empirical-quantile model. Anything else (e.g. a tabular foundation model)
is reached over a line-delimited JSON protocol on a subprocess's
stdin/stdout:

    -> {"op": "hello", "protocol": 1}
    <- {"ok": true, "name": "..."}
    -> {"op": "fit_predict", "train_x": [[...]], "train_y": [...],
        "test_x": [[...]], "taus": [...]}
    <- {"mean": [...], "quantiles": [[...]]}

Any ``{"error": ...}`` response aborts the task.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .errors import BackendFailure, ShapeMismatch, TooFewNeighbors, TooFewSamples

TAU_GRID = (0.001, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.999)

_RIDGE_REL = 1e-6  # penalty relative to the standardized Gram diagonal


def monotonize(quantiles: dict[float, float]) -> dict[float, float]:
    """Force non-decreasing quantiles in tau via cumulative max."""
    taus = sorted(quantiles)
    out = {}
    running = -np.inf
    for tau in taus:
        running = max(running, quantiles[tau])
        out[tau] = running
    return out


@dataclass(frozen=True)
class QuantileForecast:
    """Predictive mean plus quantiles on a tau grid (monotone in tau)."""

    mean: float
    quantiles: dict[float, float]

    def __post_init__(self):
        if not np.isfinite(self.mean):
            raise ValueError("forecast mean must be finite")
        object.__setattr__(self, "quantiles", monotonize(self.quantiles))

    def quantile(self, tau: float) -> float:
        """Tolerant tau lookup (grid levels are compared within 1e-12)."""
        try:
            return self.quantiles[tau]
        except KeyError:
            for key, value in self.quantiles.items():
                if abs(key - tau) <= 1e-12:
                    return value
        raise ShapeMismatch(f"no quantile at tau={tau}")

    @property
    def taus(self) -> tuple[float, ...]:
        return tuple(sorted(self.quantiles))


def gaussian_forecast(mean: float, sd: float, taus=TAU_GRID) -> QuantileForecast:
    """Gaussian predictive quantiles centered at ``mean``."""
    sd = max(float(sd), 0.0)
    qs = {float(t): float(mean + norm.ppf(t) * sd) for t in taus}
    return QuantileForecast(mean=float(mean), quantiles=qs)


@dataclass(frozen=True)
class RegressorSpec:
    """Which regressor to run: a built-in kind or an external command."""

    kind: str
    k: int = 5
    command: tuple[str, ...] = ()
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("linear_gaussian", "knn_quantile", "external"):
            raise ValueError(f"unknown regressor kind {self.kind!r}")
        if self.kind == "knn_quantile" and self.k < 1:
            raise ValueError("knn_quantile needs k >= 1")
        if self.kind == "external" and not self.command:
            raise ValueError("external regressor needs a command")
        object.__setattr__(self, "command", tuple(self.command))


def _validate_training(train_x: np.ndarray, train_y: np.ndarray) -> None:
    if train_x.ndim != 2 or train_x.shape[1] < 1:
        raise ShapeMismatch("train_x must be (n, p) with p >= 1")
    if train_x.shape[0] != train_y.shape[0]:
        raise ShapeMismatch("train_x and train_y length mismatch")
    if train_x.shape[0] < 2:
        raise TooFewSamples("need at least 2 training rows")
    if not (np.all(np.isfinite(train_x)) and np.all(np.isfinite(train_y))):
        raise ValueError("training data must be finite")


class LinearGaussianRegressor:
    """Ridge least squares with Gaussian predictive quantiles.

    Features are standardized internally; the penalty is _RIDGE_REL times
    the Gram diagonal, which keeps it negligible on clean problems. The
    predictive SD is the training residual SD with a degrees-of-freedom
    correction (n - p - 1).
    """

    name = "linear_gaussian"

    def fit_predict(self, train_x, train_y, test_x, taus=TAU_GRID):
        x = np.asarray(train_x, dtype=float)
        y = np.asarray(train_y, dtype=float)
        t = np.atleast_2d(np.asarray(test_x, dtype=float))
        _validate_training(x, y)

        mu = x.mean(axis=0)
        sd = x.std(axis=0)
        informative = sd > 0
        scale = np.where(informative, sd, 1.0)
        z = (x - mu) / scale
        zt = (t - mu) / scale

        n, p = z.shape
        gram = z.T @ z
        lam = _RIDGE_REL * max(float(np.trace(gram)) / max(p, 1), 1e-300)
        beta = np.linalg.solve(gram + lam * np.eye(p), z.T @ (y - y.mean()))

        fitted = y.mean() + z @ beta
        resid = y - fitted
        dof = max(n - int(informative.sum()) - 1, 1)
        shat = float(np.sqrt(resid @ resid / dof))

        means = y.mean() + zt @ beta
        return [gaussian_forecast(m, shat, taus) for m in means]


class KnnQuantileRegressor:
    """Empirical quantiles of the k nearest training targets.

    Distances are Euclidean in standardized feature space; ties break
    toward the lower training row. Quantiles interpolate order statistics
    linearly (numpy's default, type 7).
    """

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.name = f"knn_quantile(k={k})"

    def fit_predict(self, train_x, train_y, test_x, taus=TAU_GRID):
        x = np.asarray(train_x, dtype=float)
        y = np.asarray(train_y, dtype=float)
        t = np.atleast_2d(np.asarray(test_x, dtype=float))
        _validate_training(x, y)
        if self.k > x.shape[0]:
            raise TooFewNeighbors(f"k={self.k} but only {x.shape[0]} training rows")

        mu = x.mean(axis=0)
        sd = x.std(axis=0)
        scale = np.where(sd > 0, sd, 1.0)
        z = (x - mu) / scale
        zt = (t - mu) / scale

        taus = [float(tt) for tt in taus]
        out = []
        for row in zt:
            dist = np.sqrt(((z - row) ** 2).sum(axis=1))
            nearest = np.argsort(dist, kind="stable")[: self.k]
            vals = y[nearest]
            qs = np.quantile(vals, taus)
            out.append(
                QuantileForecast(
                    mean=float(vals.mean()),
                    quantiles=dict(zip(taus, (float(q) for q in qs))),
                )
            )
        return out


class ExternalBackend:
    """Client for one protocol-speaking subprocess.

    The process is started lazily, handshaken once, and handles one request
    at a time. Parallel workers must each own their own instance.
    """

    def __init__(self, command, timeout: float | None = 300.0):
        self.command = list(command)
        self.timeout = timeout
        self.proc: subprocess.Popen | None = None
        self.name = f"external({self.command[0]})"

    def _fail(self, message: str) -> BackendFailure:
        stderr = ""
        if self.proc is not None and self.proc.stderr is not None:
            try:
                self.proc.kill()
                stderr = self.proc.stderr.read()
            except Exception:
                pass
        self.proc = None
        return BackendFailure(f"{message}; stderr: {stderr.strip()!r}")

    def _roundtrip(self, request: dict) -> dict:
        assert self.proc is not None and self.proc.stdin and self.proc.stdout
        try:
            self.proc.stdin.write(json.dumps(request) + "\n")
            self.proc.stdin.flush()
            line = self.proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise self._fail(f"backend pipe failed: {exc}") from None
        if not line:
            raise self._fail("backend closed its stdout")
        try:
            response = json.loads(line)
        except json.JSONDecodeError:
            raise self._fail(f"backend sent non-JSON line {line!r}") from None
        if "error" in response:
            raise self._fail(f"backend error: {response['error']}")
        return response

    def _ensure_started(self) -> None:
        if self.proc is not None and self.proc.poll() is None:
            return
        self.proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
        hello = self._roundtrip({"op": "hello", "protocol": 1})
        if not hello.get("ok"):
            raise self._fail(f"handshake rejected: {hello}")
        self.name = f"external({hello.get('name', self.command[0])})"

    def fit_predict(self, train_x, train_y, test_x, taus=TAU_GRID):
        x = np.asarray(train_x, dtype=float)
        y = np.asarray(train_y, dtype=float)
        t = np.atleast_2d(np.asarray(test_x, dtype=float))
        _validate_training(x, y)
        taus = [float(tt) for tt in taus]

        self._ensure_started()
        response = self._roundtrip(
            {
                "op": "fit_predict",
                "train_x": x.tolist(),
                "train_y": y.tolist(),
                "test_x": t.tolist(),
                "taus": taus,
            }
        )
        means = response.get("mean")
        quants = response.get("quantiles")
        if means is None or quants is None:
            raise self._fail("response missing 'mean' or 'quantiles'")
        means = np.asarray(means, dtype=float)
        quants = np.asarray(quants, dtype=float)
        if means.shape != (t.shape[0],) or quants.shape != (t.shape[0], len(taus)):
            raise self._fail(
                f"response shapes {means.shape}/{quants.shape} do not match "
                f"{t.shape[0]} test rows x {len(taus)} taus"
            )
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(quants))):
            raise self._fail("backend returned non-finite values")
        return [
            QuantileForecast(mean=float(m), quantiles=dict(zip(taus, map(float, row))))
            for m, row in zip(means, quants)
        ]

    def close(self) -> None:
        if self.proc is None:
            return
        try:
            if self.proc.stdin:
                self.proc.stdin.close()
            self.proc.wait(timeout=5)
        except Exception:
            self.proc.kill()
        self.proc = None

    def __enter__(self):
        self._ensure_started()
        return self

    def __exit__(self, *exc):
        self.close()


def make_regressor(spec: RegressorSpec):
    """Instantiate the regressor described by a spec."""
    if spec.kind == "linear_gaussian":
        return LinearGaussianRegressor()
    if spec.kind == "knn_quantile":
        return KnnQuantileRegressor(spec.k)
    return ExternalBackend(spec.command, **spec.options)


def fit_predict(spec, train_x, train_y, test_x, taus=TAU_GRID):
    """One-shot convenience: build the regressor, run it, clean it up.

    ``spec`` may be a RegressorSpec or any object with a compatible
    ``fit_predict`` method.
    """
    if isinstance(spec, RegressorSpec):
        regressor = make_regressor(spec)
        try:
            return regressor.fit_predict(train_x, train_y, test_x, taus)
        finally:
            if isinstance(regressor, ExternalBackend):
                regressor.close()
    return spec.fit_predict(train_x, train_y, test_x, taus)
