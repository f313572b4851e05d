"""One-dimensional maximization: coarse grid followed by golden-section search."""
from __future__ import annotations

import math
from typing import Callable, Tuple

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-10,
    max_iter: int = 500,
) -> Tuple[float, float]:
    """Maximize a unimodal ``f`` on ``[lo, hi]``.

    Returns ``(x, f(x))``. The endpoints are compared against the interior
    estimate so that a maximum sitting on the boundary is not lost.
    """
    a, b = float(lo), float(hi)
    if b < a:
        raise ValueError("empty bracket")
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol and it < max_iter:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        it += 1
    x = 0.5 * (a + b)
    fx = f(x)
    best = (x, fx)
    for xe in (float(lo), float(hi)):
        fe = f(xe)
        if fe > best[1]:
            best = (xe, fe)
    return best


def grid_golden_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    n_grid: int,
    tol: float,
    f_vec: Callable[[np.ndarray], np.ndarray] | None = None,
) -> Tuple[float, float]:
    """Locate the best of ``n_grid`` equispaced points, then refine.

    The golden-section stage runs on the two grid cells adjacent to the best
    grid point. ``f_vec`` (optional) evaluates the grid in one call.
    """
    xs = np.linspace(lo, hi, n_grid)
    if f_vec is not None:
        ys = np.asarray(f_vec(xs), dtype=float)
    else:
        ys = np.array([f(float(x)) for x in xs])
    j = int(np.argmax(ys))
    a = xs[max(j - 1, 0)]
    b = xs[min(j + 1, n_grid - 1)]
    x, fx = golden_section_max(f, a, b, tol=tol)
    if ys[j] > fx:
        return float(xs[j]), float(ys[j])
    return x, fx
