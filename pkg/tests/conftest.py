"""Shared oracles and fixtures.

The kriging oracle below rebuilds the bordered semivariance system from
scratch with its own closed-form variogram formulas and a plain dense
solve, so it shares no code with the library path it validates.
"""

from __future__ import annotations

import numpy as np
import pytest


def oracle_gamma(family: str, nugget: float, psill: float, rng: float, h):
    """Closed-form semivariance, written independently of the library."""
    h = np.asarray(h, dtype=float)
    if family == "spherical":
        ratio = np.minimum(h / rng, 1.0)
        struct = 1.5 * ratio - 0.5 * ratio**3
    elif family == "exponential":
        struct = 1.0 - np.exp(-3.0 * h / rng)
    elif family == "gaussian":
        struct = 1.0 - np.exp(-3.0 * (h / rng) ** 2)
    else:
        raise ValueError(family)
    return np.where(h > 0, nugget + psill * struct, 0.0)


def oracle_ok_solve(train_locs, train_vals, family, nugget, psill, rng, query):
    """Independent dense bordered-system solve for one query location.

    Assembles the full (n+1) x (n+1) matrix from the closed-form
    semivariances above and solves it in one shot with numpy. Returns
    (mean, variance, lagrange, weights).
    """
    locs = np.asarray(train_locs, dtype=float)
    vals = np.asarray(train_vals, dtype=float)
    n = locs.shape[0]
    diff = locs[:, None, :] - locs[None, :, :]
    dists = np.hypot(diff[..., 0], diff[..., 1])
    a = np.zeros((n + 1, n + 1))
    a[:n, :n] = oracle_gamma(family, nugget, psill, rng, dists)
    a[n, :n] = 1.0
    a[:n, n] = 1.0
    b = np.zeros(n + 1)
    dq = np.hypot(*(locs - np.asarray(query, dtype=float)).T)
    b[:n] = oracle_gamma(family, nugget, psill, rng, dq)
    b[n] = 1.0
    sol = np.linalg.solve(a, b)
    weights = sol[:n]
    psi = sol[n]
    mean = float(weights @ vals)
    var = float(weights @ b[:n]) + psi
    return mean, var, psi, weights


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))
