"""Scanline polygon rasterization and pixel-set IoU.

A pixel ``(row, col)`` belongs to a polygon when its center
``(col + 0.5, row + 0.5)`` lies inside under the even-odd rule. Scanline
crossings use half-open edge spans (``y1 <= yc < y2``) so shared vertices are
counted once, and each row's span ``[a, b)`` covers the pixel columns
``ceil(a - 0.5) .. ceil(b - 0.5) - 1``.
"""

from __future__ import annotations

import math
import warnings

import numpy as np


def _as_polygon(polygon: np.ndarray, name: str = "polygon") -> np.ndarray:
    poly = np.asarray(polygon, dtype=np.float64)
    if poly.ndim != 2 or poly.shape[1] != 2 or poly.shape[0] < 3:
        raise ValueError(f"{name} must be an (n, 2) array with n >= 3")
    if not np.isfinite(poly).all():
        raise ValueError(f"{name} contains non-finite coordinates")
    return poly


def rasterize_polygon(polygon: np.ndarray, height: int, width: int) -> np.ndarray:
    """Boolean (height, width) mask of pixels whose centers are inside."""
    poly = _as_polygon(polygon)
    if height < 0 or width < 0:
        raise ValueError("raster dims must be non-negative")
    mask = np.zeros((height, width), dtype=bool)
    x1 = poly[:, 0]
    y1 = poly[:, 1]
    x2 = np.roll(x1, -1)
    y2 = np.roll(y1, -1)
    keep = y1 != y2
    if not keep.any():
        return mask
    x1, y1, x2, y2 = x1[keep], y1[keep], x2[keep], y2[keep]
    for row in range(height):
        yc = row + 0.5
        hit = ((y1 <= yc) & (yc < y2)) | ((y2 <= yc) & (yc < y1))
        if not hit.any():
            continue
        xs = x1[hit] + (yc - y1[hit]) * (x2[hit] - x1[hit]) / (y2[hit] - y1[hit])
        xs.sort()
        for lo, hi in zip(xs[0::2], xs[1::2]):
            c0 = max(0, math.ceil(lo - 0.5))
            c1 = min(width, math.ceil(hi - 0.5))
            if c1 > c0:
                mask[row, c0:c1] = True
    return mask


def _cropped_masks(
    poly_a: np.ndarray, poly_b: np.ndarray, height: int, width: int
) -> tuple[np.ndarray, np.ndarray]:
    """Rasterize both polygons on their joint bounding box.

    Pixels outside the box belong to neither polygon, so the crop is exact
    for intersection and union counts over the full (height, width) raster.
    """
    a = _as_polygon(poly_a, "poly_a")
    b = _as_polygon(poly_b, "poly_b")
    both = np.vstack([a, b])
    c0 = max(0, int(math.floor(both[:, 0].min())) - 1)
    c1 = min(width, int(math.ceil(both[:, 0].max())) + 2)
    r0 = max(0, int(math.floor(both[:, 1].min())) - 1)
    r1 = min(height, int(math.ceil(both[:, 1].max())) + 2)
    if c1 <= c0 or r1 <= r0:
        empty = np.zeros((0, 0), dtype=bool)
        return empty, empty
    shift = np.array([c0, r0], dtype=np.float64)
    return (
        rasterize_polygon(a - shift, r1 - r0, c1 - c0),
        rasterize_polygon(b - shift, r1 - r0, c1 - c0),
    )


def polygon_pixel_counts(
    poly_a: np.ndarray, poly_b: np.ndarray, height: int, width: int
) -> tuple[int, int]:
    """Exact (intersection, union) pixel counts of two polygons on a raster."""
    mask_a, mask_b = _cropped_masks(poly_a, poly_b, height, width)
    return int((mask_a & mask_b).sum()), int((mask_a | mask_b).sum())


def mask_iou(poly_a: np.ndarray, poly_b: np.ndarray, raster: tuple[int, int]) -> float:
    """Intersection-over-union of the rasterized polygons, in [0, 1].

    A degenerate polygon (covering no pixel at all) yields an IoU of 0 with
    a warning.
    """
    height, width = raster
    mask_a, mask_b = _cropped_masks(poly_a, poly_b, height, width)
    if not mask_a.any() or not mask_b.any():
        warnings.warn("degenerate polygon with no pixel coverage; IoU set to 0")
        return 0.0
    inter = int((mask_a & mask_b).sum())
    union = int((mask_a | mask_b).sum())
    return inter / union


def polygon_is_simple(polygon: np.ndarray) -> bool:
    """True when no two non-adjacent edges intersect (O(n^2) check)."""
    poly = _as_polygon(polygon)
    n = poly.shape[0]

    def seg(i: int) -> tuple[np.ndarray, np.ndarray]:
        return poly[i], poly[(i + 1) % n]

    def orient(p: np.ndarray, q: np.ndarray, r: np.ndarray) -> float:
        return (q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1])

    def intersects(a0, a1, b0, b1) -> bool:
        d1 = orient(b0, b1, a0)
        d2 = orient(b0, b1, a1)
        d3 = orient(a0, a1, b0)
        d4 = orient(a0, a1, b1)
        if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
            return True
        return False

    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            a0, a1 = seg(i)
            b0, b1 = seg(j)
            if intersects(a0, a1, b0, b1):
                return False
    return True
