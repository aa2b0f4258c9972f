"""Regular and deformable 2-D convolution with analytic gradients.

The deformable variant displaces each kernel tap by an input-location specific
fractional offset and reads the displaced value through zero-padded bilinear
interpolation, so outputs stay differentiable in the offsets.

Conventions, fixed here and relied on by the tests:

* feature maps are ``(channels, height, width)`` float64 arrays;
* kernel taps enumerate the ``k x k`` window row-major, centered on ``(0, 0)``;
* offset fields store one ``(d_row, d_col)`` pair per tap, tap-major: channel
  ``2n`` moves tap ``n`` along axis 0, channel ``2n + 1`` along axis 1;
* stride 1, dilation 1, zero same-padding, so spatial dims are preserved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConvKernel:
    """Square odd-sized convolution filter bank of shape (c_out, c_in, k, k)."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 4:
            raise ValueError("kernel weights must have shape (c_out, c_in, k, k)")
        if w.shape[2] != w.shape[3]:
            raise ValueError("kernel must be spatially square")
        if w.shape[2] % 2 == 0:
            raise ValueError("kernel size must be odd")
        if not np.isfinite(w).all():
            raise ValueError("kernel weights must be finite")
        object.__setattr__(self, "weights", w)

    @property
    def c_out(self) -> int:
        return self.weights.shape[0]

    @property
    def c_in(self) -> int:
        return self.weights.shape[1]

    @property
    def k(self) -> int:
        return self.weights.shape[2]

    @property
    def tap_grid(self) -> np.ndarray:
        """(k*k, 2) integer (row, col) tap displacements, row-major order."""
        half = self.k // 2
        taps = [(a - half, b - half) for a in range(self.k) for b in range(self.k)]
        return np.array(taps, dtype=np.int64)


@dataclass(frozen=True)
class OffsetField:
    """Per-location fractional tap displacements, shape (2*k*k, h, w)."""

    offsets: np.ndarray

    def __post_init__(self) -> None:
        off = np.asarray(self.offsets, dtype=np.float64)
        if off.ndim != 3 or off.shape[0] % 2 != 0:
            raise ValueError("offsets must have shape (2*n_taps, h, w)")
        if not np.isfinite(off).all():
            raise ValueError("offsets must be finite")
        object.__setattr__(self, "offsets", off)

    @property
    def n_taps(self) -> int:
        return self.offsets.shape[0] // 2

    @classmethod
    def zeros(cls, k: int, h: int, w: int) -> "OffsetField":
        return cls(np.zeros((2 * k * k, h, w)))


def _check_input(x: np.ndarray, kernel: ConvKernel) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError("input must have shape (c_in, h, w)")
    if x.shape[0] != kernel.c_in:
        raise ValueError(
            f"input has {x.shape[0]} channels but kernel expects {kernel.c_in}"
        )
    return x


def regular_conv2d(x: np.ndarray, kernel: ConvKernel) -> np.ndarray:
    """Stride-1 same-padded convolution over the fixed integer tap grid."""
    x = _check_input(x, kernel)
    _, h, w = x.shape
    k = kernel.k
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    out = np.zeros((kernel.c_out, h, w))
    for a in range(k):
        for b in range(k):
            out += np.tensordot(kernel.weights[:, :, a, b], xp[:, a : a + h, b : b + w], axes=(1, 0))
    return out


def _tap_positions(kernel: ConvKernel, field: OffsetField, h: int, w: int):
    """Sampling positions (rows, cols), each of shape (n_taps, h, w)."""
    taps = kernel.tap_grid
    base_r = np.arange(h)[None, :, None] + taps[:, 0][:, None, None]
    base_c = np.arange(w)[None, None, :] + taps[:, 1][:, None, None]
    rows = base_r + field.offsets[0::2]
    cols = base_c + field.offsets[1::2]
    return rows, cols


def _corner_terms(x: np.ndarray, rows: np.ndarray, cols: np.ndarray):
    """Corner values and fractional weights for vectorized bilinear sampling.

    Returns ``(values, f_r, f_c, i0, j0)`` where ``values[(di, dj)]`` holds the
    zero-padded map values at corner ``(i0+di, j0+dj)`` with a leading channel
    axis.
    """
    _, h, w = x.shape
    i0 = np.floor(rows).astype(np.int64)
    j0 = np.floor(cols).astype(np.int64)
    f_r = rows - i0
    f_c = cols - j0
    values = {}
    for di in (0, 1):
        for dj in (0, 1):
            ii = i0 + di
            jj = j0 + dj
            inside = (ii >= 0) & (ii < h) & (jj >= 0) & (jj < w)
            vals = x[:, np.clip(ii, 0, h - 1), np.clip(jj, 0, w - 1)]
            values[(di, dj)] = np.where(inside[None], vals, 0.0)
    return values, f_r, f_c, i0, j0


def _check_field(x: np.ndarray, kernel: ConvKernel, field: OffsetField) -> None:
    if field.offsets.shape != (2 * kernel.k * kernel.k, x.shape[1], x.shape[2]):
        raise ValueError(
            f"offset field shape {field.offsets.shape} does not match kernel "
            f"k={kernel.k} and input spatial dims {x.shape[1:]}"
        )


def deformable_conv2d(x: np.ndarray, kernel: ConvKernel, field: OffsetField) -> np.ndarray:
    """Convolution with per-location fractional tap displacements."""
    x = _check_input(x, kernel)
    _check_field(x, kernel, field)
    _, h, w = x.shape
    rows, cols = _tap_positions(kernel, field, h, w)
    values, f_r, f_c, _, _ = _corner_terms(x, rows, cols)
    samples = (
        (1.0 - f_r) * (1.0 - f_c) * values[(0, 0)]
        + (1.0 - f_r) * f_c * values[(0, 1)]
        + f_r * (1.0 - f_c) * values[(1, 0)]
        + f_r * f_c * values[(1, 1)]
    )
    w_flat = kernel.weights.reshape(kernel.c_out, kernel.c_in, kernel.k * kernel.k)
    return np.einsum("oin,inhw->ohw", w_flat, samples)


def offset_generation(x: np.ndarray, offset_kernel: ConvKernel) -> OffsetField:
    """Produce an offset field by convolving the input with an auxiliary bank.

    The auxiliary kernel must emit ``2*k*k`` channels, two per tap of a
    ``k x k`` main kernel; here ``k`` equals the auxiliary kernel's own size.
    """
    k = offset_kernel.k
    if offset_kernel.c_out != 2 * k * k:
        raise ValueError(
            f"offset kernel must have 2*k*k = {2 * k * k} output channels, "
            f"got {offset_kernel.c_out}"
        )
    return OffsetField(regular_conv2d(x, offset_kernel))


def deformable_conv2d_backward(
    x: np.ndarray,
    kernel: ConvKernel,
    field: OffsetField,
    upstream: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of ``sum(upstream * deformable_conv2d(x, kernel, field))``.

    Returns ``(d_x, d_weights, d_offsets)`` with the shapes of ``x``,
    ``kernel.weights`` and ``field.offsets``. Position gradients follow the
    same right-hand convention as the bilinear sampler at lattice breakpoints.
    """
    x = _check_input(x, kernel)
    _check_field(x, kernel, field)
    upstream = np.asarray(upstream, dtype=np.float64)
    _, h, w = x.shape
    if upstream.shape != (kernel.c_out, h, w):
        raise ValueError(
            f"upstream shape {upstream.shape} does not match output "
            f"shape {(kernel.c_out, h, w)}"
        )

    k = kernel.k
    rows, cols = _tap_positions(kernel, field, h, w)
    values, f_r, f_c, i0, j0 = _corner_terms(x, rows, cols)
    v00, v01 = values[(0, 0)], values[(0, 1)]
    v10, v11 = values[(1, 0)], values[(1, 1)]

    samples = (
        (1.0 - f_r) * (1.0 - f_c) * v00
        + (1.0 - f_r) * f_c * v01
        + f_r * (1.0 - f_c) * v10
        + f_r * f_c * v11
    )

    w_flat = kernel.weights.reshape(kernel.c_out, kernel.c_in, k * k)
    d_w = np.einsum("ohw,inhw->oin", upstream, samples).reshape(kernel.weights.shape)

    # d(loss)/d(sample value), shape (c_in, n_taps, h, w).
    g = np.einsum("ohw,oin->inhw", upstream, w_flat)

    dv_dr = -(1.0 - f_c) * v00 - f_c * v01 + (1.0 - f_c) * v10 + f_c * v11
    dv_dc = -(1.0 - f_r) * v00 + (1.0 - f_r) * v01 - f_r * v10 + f_r * v11
    d_off = np.empty_like(field.offsets)
    d_off[0::2] = (g * dv_dr).sum(axis=0)
    d_off[1::2] = (g * dv_dc).sum(axis=0)

    d_x = np.zeros_like(x)
    channel_idx = np.arange(x.shape[0])[:, None, None, None]
    corner_weights = {
        (0, 0): (1.0 - f_r) * (1.0 - f_c),
        (0, 1): (1.0 - f_r) * f_c,
        (1, 0): f_r * (1.0 - f_c),
        (1, 1): f_r * f_c,
    }
    for (di, dj), cw in corner_weights.items():
        ii = i0 + di
        jj = j0 + dj
        inside = (ii >= 0) & (ii < h) & (jj >= 0) & (jj < w)
        contrib = np.where(inside[None], g * cw[None], 0.0)
        np.add.at(
            d_x,
            (channel_idx, np.clip(ii, 0, h - 1)[None], np.clip(jj, 0, w - 1)[None]),
            contrib,
        )
    return d_x, d_w, d_off
