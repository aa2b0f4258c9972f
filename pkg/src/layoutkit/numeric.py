"""Bilinear sampling and finite-difference utilities.

Feature maps are dense float64 numpy arrays. Sample locations are given in
array coordinates: the first component of a location runs along axis 0 of the
map, the second along axis 1. Locations outside ``[0, H-1] x [0, W-1]`` are
zero padded: each of the four interpolation taps contributes 0 whenever its
integer coordinate falls outside the map.

The sampled value is piecewise linear in the location. At integer breakpoints
the derivative returned by :func:`bilinear_sample_grad` is the right-hand
limit (the taps are anchored with ``floor``).
"""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np


def _validate_map(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2 or grid.shape[0] < 1 or grid.shape[1] < 1:
        raise ValueError("expected a non-empty 2-D map")
    return grid


def bilinear_sample_many(plane: np.ndarray, p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    """Bilinearly interpolate ``plane`` at every location ``(p0, p1)``.

    ``p0`` and ``p1`` are broadcastable arrays of axis-0 / axis-1 coordinates.
    Out-of-range taps contribute zero.
    """
    h, w = plane.shape
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    i0 = np.floor(p0).astype(np.int64)
    j0 = np.floor(p1).astype(np.int64)
    f0 = p0 - i0
    f1 = p1 - j0
    out = np.zeros(np.broadcast(p0, p1).shape, dtype=np.float64)
    for di, wi in ((0, 1.0 - f0), (1, f0)):
        for dj, wj in ((0, 1.0 - f1), (1, f1)):
            ii = i0 + di
            jj = j0 + dj
            inside = (ii >= 0) & (ii < h) & (jj >= 0) & (jj < w)
            vals = plane[np.clip(ii, 0, h - 1), np.clip(jj, 0, w - 1)]
            out += wi * wj * np.where(inside, vals, 0.0)
    return out


def bilinear_sample(grid: np.ndarray, p: Sequence[float]) -> float:
    """Bilinear interpolation of a 2-D map at location ``p = (p0, p1)``."""
    grid = _validate_map(grid)
    value = bilinear_sample_many(grid, np.float64(p[0]), np.float64(p[1]))
    return float(value)


def bilinear_sample_grad(grid: np.ndarray, p: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Analytic derivatives of :func:`bilinear_sample` at ``p``.

    Returns ``(tap_weights, d_pos)`` where ``tap_weights[a, b]`` is the
    derivative of the sampled value with respect to the map cell
    ``(floor(p0) + a, floor(p1) + b)`` and ``d_pos`` is the derivative with
    respect to ``(p0, p1)``. Out-of-range taps count as constant zeros, so
    they do not contribute to ``d_pos``.
    """
    grid = _validate_map(grid)
    h, w = grid.shape
    p0 = float(p[0])
    p1 = float(p[1])
    i0 = int(np.floor(p0))
    j0 = int(np.floor(p1))
    f0 = p0 - i0
    f1 = p1 - j0

    tap_weights = np.array(
        [
            [(1.0 - f0) * (1.0 - f1), (1.0 - f0) * f1],
            [f0 * (1.0 - f1), f0 * f1],
        ]
    )

    def cell(di: int, dj: int) -> float:
        ii, jj = i0 + di, j0 + dj
        if 0 <= ii < h and 0 <= jj < w:
            return float(grid[ii, jj])
        return 0.0

    v00, v01 = cell(0, 0), cell(0, 1)
    v10, v11 = cell(1, 0), cell(1, 1)
    d0 = -(1.0 - f1) * v00 - f1 * v01 + (1.0 - f1) * v10 + f1 * v11
    d1 = -(1.0 - f0) * v00 + (1.0 - f0) * v01 - f0 * v10 + f0 * v11
    return tap_weights, np.array([d0, d1])


def central_finite_difference(
    f: Callable[[np.ndarray], float], at: np.ndarray, eps: float
) -> np.ndarray:
    """Central finite-difference gradient of a scalar function.

    Returns ``(f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps)`` for every
    coordinate of ``at``; the result has the same shape as ``at``. Evaluation
    failures propagate to the caller.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    at = np.asarray(at, dtype=np.float64)
    grad = np.empty_like(at)
    for idx in np.ndindex(at.shape):
        hi = at.copy()
        hi[idx] += eps
        lo = at.copy()
        lo[idx] -= eps
        grad[idx] = (f(hi) - f(lo)) / (2.0 * eps)
    return grad
