"""Seeded finite-difference verification suites for the analytic gradients.

Each suite draws random small instances, compares an analytic gradient
against :func:`layoutkit.numeric.central_finite_difference`, and reports the
worst relative error ``|a - f| / max(1, |a| + |f|)`` over all coordinates and
instances. Convolution offsets are drawn with fractional parts in
[0.05, 0.95] so sampling positions stay well clear of the bilinear lattice
breakpoints the central difference would otherwise straddle; the grid losses
are smooth in the coordinates being checked, so they need no such margin.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import defgrid
from .deform_conv import ConvKernel, OffsetField, deformable_conv2d, deformable_conv2d_backward
from .numeric import central_finite_difference

DEFAULT_EPS = 1e-5
DEFAULT_TOLERANCE = 1e-5


@dataclass(frozen=True)
class SuiteResult:
    name: str
    instances: int
    max_rel_err: float

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_err < tolerance


def _rel_err(analytic: np.ndarray, fd: np.ndarray) -> float:
    denom = np.maximum(1.0, np.abs(analytic) + np.abs(fd))
    return float((np.abs(analytic - fd) / denom).max())


def _random_offsets(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Offsets with fractional parts in [0.05, 0.95], integer parts in [-2, 1]."""
    base = rng.integers(-2, 2, shape).astype(np.float64)
    frac = rng.uniform(0.05, 0.95, shape)
    return base + frac


def run_conv_gradcheck(
    seed: int, instances: int = 50, eps: float = DEFAULT_EPS
) -> list[SuiteResult]:
    """Check deformable-convolution gradients w.r.t. input, weights, offsets."""
    rng = np.random.default_rng(seed)
    worst = {"conv.d_input": 0.0, "conv.d_weights": 0.0, "conv.d_offsets": 0.0}
    for _ in range(instances):
        c_in = int(rng.integers(1, 3))
        c_out = int(rng.integers(1, 3))
        h = int(rng.integers(4, 9))
        w = int(rng.integers(4, 9))
        k = 3
        x = rng.normal(0.0, 1.0, (c_in, h, w))
        kernel = ConvKernel(rng.normal(0.0, 0.5, (c_out, c_in, k, k)))
        field = OffsetField(_random_offsets(rng, (2 * k * k, h, w)))
        upstream = rng.normal(0.0, 1.0, (c_out, h, w))

        d_x, d_w, d_off = deformable_conv2d_backward(x, kernel, field, upstream)

        def loss_x(flat: np.ndarray) -> float:
            out = deformable_conv2d(flat.reshape(x.shape), kernel, field)
            return float((upstream * out).sum())

        def loss_w(flat: np.ndarray) -> float:
            out = deformable_conv2d(x, ConvKernel(flat.reshape(kernel.weights.shape)), field)
            return float((upstream * out).sum())

        def loss_off(flat: np.ndarray) -> float:
            out = deformable_conv2d(x, kernel, OffsetField(flat.reshape(field.offsets.shape)))
            return float((upstream * out).sum())

        fd_x = central_finite_difference(loss_x, x.ravel(), eps).reshape(x.shape)
        fd_w = central_finite_difference(loss_w, kernel.weights.ravel(), eps).reshape(
            kernel.weights.shape
        )
        fd_off = central_finite_difference(loss_off, field.offsets.ravel(), eps).reshape(
            field.offsets.shape
        )
        worst["conv.d_input"] = max(worst["conv.d_input"], _rel_err(d_x, fd_x))
        worst["conv.d_weights"] = max(worst["conv.d_weights"], _rel_err(d_w, fd_w))
        worst["conv.d_offsets"] = max(worst["conv.d_offsets"], _rel_err(d_off, fd_off))
    return [SuiteResult(name, instances, err) for name, err in worst.items()]


def _random_grid(rng: np.random.Generator, size: int) -> defgrid.DeformableGrid:
    grid = defgrid.build_grid(size, size)
    raw = rng.normal(0.0, 0.15, (grid.n_vertices, 2))
    return defgrid.apply_offsets(grid, raw)


def run_defgrid_gradcheck(
    seed: int, instances: int = 50, eps: float = DEFAULT_EPS
) -> list[SuiteResult]:
    """Check the four grid losses against central finite differences.

    Area and direction losses are differentiated w.r.t. the vertex offsets,
    the two feature losses w.r.t. the feature map (the piecewise-constant
    cell lookup makes geometry gradients of the feature losses zero almost
    everywhere, so features are the meaningful coordinates there).
    """
    rng = np.random.default_rng(seed)
    worst = {
        "defgrid.area_uniformity": 0.0,
        "defgrid.neighbor_direction": 0.0,
        "defgrid.cell_feature_variance": 0.0,
        "defgrid.reconstruction": 0.0,
    }
    for _ in range(instances):
        size = int(rng.integers(3, 6))
        grid = _random_grid(rng, size)
        features = rng.normal(0.0, 1.0, (2, size, size))

        analytic = defgrid.area_uniformity_loss_grad(grid)

        def loss_area(flat: np.ndarray) -> float:
            moved = replace(grid, vertices=flat.reshape(-1, 2))
            return defgrid.area_uniformity_loss(moved)

        fd = central_finite_difference(loss_area, grid.vertices.ravel(), eps).reshape(-1, 2)
        worst["defgrid.area_uniformity"] = max(
            worst["defgrid.area_uniformity"], _rel_err(analytic, fd)
        )

        raw = rng.normal(0.0, 0.3, (grid.n_vertices, 2))
        analytic = defgrid.neighbor_direction_loss_grad(grid, raw)

        def loss_dir(flat: np.ndarray) -> float:
            return defgrid.neighbor_direction_loss(grid, flat.reshape(-1, 2))

        fd = central_finite_difference(loss_dir, raw.ravel(), eps).reshape(-1, 2)
        worst["defgrid.neighbor_direction"] = max(
            worst["defgrid.neighbor_direction"], _rel_err(analytic, fd)
        )

        analytic = defgrid.cell_feature_variance_loss_grad(features, grid)

        def loss_var(flat: np.ndarray) -> float:
            return defgrid.cell_feature_variance_loss(flat.reshape(features.shape), grid)

        fd = central_finite_difference(loss_var, features.ravel(), eps).reshape(features.shape)
        worst["defgrid.cell_feature_variance"] = max(
            worst["defgrid.cell_feature_variance"], _rel_err(analytic, fd)
        )

        analytic = defgrid.reconstruction_loss_grad(features, grid)

        def loss_rec(flat: np.ndarray) -> float:
            return defgrid.reconstruction_loss(flat.reshape(features.shape), grid)

        fd = central_finite_difference(loss_rec, features.ravel(), eps).reshape(features.shape)
        worst["defgrid.reconstruction"] = max(
            worst["defgrid.reconstruction"], _rel_err(analytic, fd)
        )
    return [SuiteResult(name, instances, err) for name, err in worst.items()]


def run_all(
    seed: int, instances: int = 50, eps: float = DEFAULT_EPS
) -> list[SuiteResult]:
    return run_conv_gradcheck(seed, instances, eps) + run_defgrid_gradcheck(
        seed, instances, eps
    )
