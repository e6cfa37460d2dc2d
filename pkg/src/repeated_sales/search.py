"""One-dimensional maximization: coarse grid followed by golden-section refinement."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI_SQ = (3.0 - math.sqrt(5.0)) / 2.0


def golden_max(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on ``[a, b]``.

    Returns ``(x, f(x))``. The bracket endpoints are compared against the
    interior estimate at the end, so maxima sitting on a corner are returned
    exactly rather than ``tol`` away from it.
    """
    lo, hi = a, b
    if hi - lo <= tol:
        x = 0.5 * (lo + hi)
        return x, f(x)
    c = lo + INV_PHI_SQ * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        # ties move the bracket left so plateaus resolve to their infimum
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = lo + INV_PHI_SQ * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = f(d)
    x = c if fc >= fd else d
    fx = max(fc, fd)
    fa, fb = f(a), f(b)
    if fa >= fx and fa >= fb:
        return a, fa
    if fb > fx:
        return b, fb
    return x, fx


def grid_golden_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    n_grid: int = 4097,
    tol: float = 1e-10,
    vectorized: Callable[[np.ndarray], np.ndarray] | None = None,
) -> tuple[float, float]:
    """Grid search over ``[lo, hi]`` then golden refinement around the best cell.

    ``vectorized`` evaluates the objective on an array in one call; when absent
    ``f`` is called point by point. The first maximal grid index wins, which
    makes the result the infimum of a flat argmax set up to ``tol``.
    """
    if hi < lo:
        raise ValueError(f"empty search interval [{lo}, {hi}]")
    if hi - lo <= tol:
        return lo, f(lo)
    xs = np.linspace(lo, hi, n_grid)
    if vectorized is not None:
        ys = np.asarray(vectorized(xs), dtype=float)
    else:
        ys = np.array([f(float(x)) for x in xs])
    ys = np.where(np.isnan(ys), -np.inf, ys)
    i = int(np.argmax(ys))
    if not np.isfinite(ys[i]):
        raise ValueError("objective is not finite anywhere on the grid")
    a = float(xs[max(i - 1, 0)])
    b = float(xs[min(i + 1, n_grid - 1)])
    x, fx = golden_max(f, a, b, tol)
    if ys[i] > fx:
        return float(xs[i]), float(ys[i])
    return x, fx
