"""Stdio server exposing a tabular quantile regressor.

Protocol (UTF-8, one JSON object per line, one response per request):

    -> {"op": "hello", "protocol": 1}
    <- {"ok": true, "name": "tabpfn-adapter", "model": "...", "protocol": 1}
    -> {"op": "fit_predict", "train_x": [[...]], "train_y": [...],
        "test_x": [[...]], "taus": [...]}
    <- {"mean": [...], "quantiles": [[...]]}

Quantile rows align to test_x and columns to the requested taus. Malformed
requests get an {"error": ...} line and the loop continues; a model that
cannot be loaded gets an {"error": ...} line and a nonzero exit.

The model is constructed once per process (fit is per request, which is
how in-context learners work); run one process per parallel worker.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

PROTOCOL_VERSION = 1


class StubModel:
    """Deterministic stand-in for protocol tests: Gaussian around the mean."""

    name = "stub-gaussian"

    def fit_predict(self, train_x, train_y, test_x, taus):
        y = np.asarray(train_y, dtype=float)
        n_test = len(test_x)
        mean = float(y.mean())
        sd = float(y.std())
        # Rough normal quantiles without scipy: inverse erf via polynomial
        # is overkill here, a linear ramp keeps rows monotone in tau.
        offsets = [sd * (2.0 * float(t) - 1.0) * 1.2816 for t in taus]
        quantiles = [[mean + o for o in offsets]] * n_test
        return [mean] * n_test, quantiles


class TabPFNModel:
    """Wraps the TabPFN regressor in its default configuration."""

    def __init__(self):
        from tabpfn import TabPFNRegressor  # deferred heavy import

        self._regressor = TabPFNRegressor()
        version = getattr(
            sys.modules.get("tabpfn"), "__version__", "unknown"
        )
        self.name = f"tabpfn/{version}"

    def fit_predict(self, train_x, train_y, test_x, taus):
        x = np.asarray(train_x, dtype=float)
        y = np.asarray(train_y, dtype=float)
        t = np.asarray(test_x, dtype=float)
        taus = [float(v) for v in taus]
        self._regressor.fit(x, y)
        mean = np.asarray(self._regressor.predict(t), dtype=float)
        raw = self._regressor.predict(t, output_type="quantiles", quantiles=taus)
        # The API returns one array per requested quantile.
        cols = [np.asarray(c, dtype=float).reshape(-1) for c in raw]
        quantiles = np.column_stack(cols)
        return mean.tolist(), quantiles.tolist()


def _error(message: str) -> str:
    return json.dumps({"error": message})


def _handle(request: dict, model) -> str:
    op = request.get("op")
    if op == "hello":
        return json.dumps(
            {
                "ok": True,
                "name": "tabpfn-adapter",
                "model": model.name,
                "protocol": PROTOCOL_VERSION,
            }
        )
    if op != "fit_predict":
        return _error(f"unknown op {op!r}")
    try:
        train_x = request["train_x"]
        train_y = request["train_y"]
        test_x = request["test_x"]
        taus = request["taus"]
    except KeyError as exc:
        return _error(f"missing field {exc.args[0]!r}")
    if len(train_x) != len(train_y):
        return _error("train_x and train_y length mismatch")
    if not train_x or not test_x or not taus:
        return _error("empty train_x, test_x or taus")
    try:
        mean, quantiles = model.fit_predict(train_x, train_y, test_x, taus)
    except Exception as exc:
        return _error(f"prediction failed: {exc}")
    if not all(np.isfinite(mean)) or not np.all(np.isfinite(quantiles)):
        return _error("model produced non-finite values")
    return json.dumps({"mean": list(mean), "quantiles": [list(r) for r in quantiles]})


def serve(stdin, stdout, model_factory) -> int:
    """Request loop: one response line per request line, until EOF."""
    model = None
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError:
            print(_error("request is not valid JSON"), file=stdout, flush=True)
            continue
        if model is None:
            try:
                model = model_factory()
            except Exception as exc:
                print(_error(f"model load failed: {exc}"), file=stdout, flush=True)
                return 1
        print(_handle(request, model), file=stdout, flush=True)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tabpfn-adapter",
        description="Serve TabPFN over line-delimited JSON on stdin/stdout",
    )
    parser.add_argument(
        "--backend",
        choices=("tabpfn", "stub"),
        default="tabpfn",
        help="stub is a deterministic model for protocol testing",
    )
    args = parser.parse_args(argv)
    factory = StubModel if args.backend == "stub" else TabPFNModel
    return serve(sys.stdin, sys.stdout, factory)


if __name__ == "__main__":
    sys.exit(main())
