"""Independent oracles used by the tests.

These deliberately re-derive results by brute force (dense grids, direct
formulas) and never call the library code paths they check.
"""

from __future__ import annotations

import math

import numpy as np


def nearest_rank(values, pct):
    """Nearest-rank percentile straight from the definition."""
    ordered = sorted(values)
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[rank - 1]


def logistic_objective_batch(X, y, C):
    """Vectorized J over a (G, d+1) parameter grid; params are w then b."""

    def f(params):
        W = params[:, :-1]
        b = params[:, -1]
        margins = y[None, :] * (X @ W.T + b[None, :]).T
        return 0.5 * (W * W).sum(axis=1) + C * np.logaddexp(0.0, -margins).sum(axis=1)

    return f


def hinge_objective_batch(X, y, C):
    def f(params):
        W = params[:, :-1]
        b = params[:, -1]
        margins = y[None, :] * (X @ W.T + b[None, :]).T
        return 0.5 * (W * W).sum(axis=1) + C * np.maximum(0.0, 1.0 - margins).sum(axis=1)

    return f


def grid_minimize(objective, dim, lo=-3.0, hi=3.0, points=21, refinements=4):
    """Dense grid search over a parameter box, re-centered and shrunk around
    the best point after each pass."""
    lo = np.full(dim, lo, dtype=float)
    hi = np.full(dim, hi, dtype=float)
    best_params, best_val = None, np.inf
    for _ in range(refinements + 1):
        axes = [np.linspace(lo[i], hi[i], points) for i in range(dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        params = np.stack([m.ravel() for m in mesh], axis=1)
        vals = objective(params)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val = float(vals[k])
            best_params = params[k].copy()
        step = (hi - lo) / (points - 1)
        lo = best_params - 1.5 * step
        hi = best_params + 1.5 * step
    return best_params, best_val


def small_instance(seed):
    """Reproducible random binary classification instance with N <= 12, d <= 3."""
    r = np.random.default_rng(seed)
    n = int(r.integers(8, 13))
    d = int(r.integers(1, 4))
    X = r.standard_normal((n, d))
    w_true = r.standard_normal(d)
    y = np.where(X @ w_true + 0.3 * r.standard_normal(n) > 0, 1.0, -1.0)
    return X, y


def central_difference_gradient(objective, w, b, h=1e-5):
    """Central finite differences of a scalar objective over (w, b)."""
    theta = np.concatenate([w, [b]])
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        plus = theta.copy()
        minus = theta.copy()
        plus[i] += h
        minus[i] -= h
        grad[i] = (objective(plus[:-1], plus[-1]) - objective(minus[:-1], minus[-1])) / (2 * h)
    return grad
