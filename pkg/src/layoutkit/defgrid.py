"""Deformable triangulated grid: geometry, losses, offset head, polygon masks.

A grid of ``height x width`` vertices tiles the integer lattice; every unit
cell is split into two triangles by one diagonal, with the diagonal direction
alternating checkerboard-wise so the edge set stays a planar subset of the
8-neighbor graph. Vertex positions are ``(x, y)`` with ``x`` along columns
(axis 1 of feature maps) and ``y`` along rows (axis 0). All triangles of the
undeformed grid have signed area +0.5 under the shoelace rule used here.

Deformation moves each vertex by a per-vertex offset, clamped per component
to ±(0.5 - 1e-3) cell units. Boundary vertices may only slide along their
boundary edge and corner vertices are pinned. Because the clamp alone cannot
rule out inverted triangles for adversarial offset patterns, ``apply_offsets``
finishes with a deterministic repair pass that halves the offsets of any
triangle-inverting vertices until every signed area is positive.

Feature losses read the feature map as piecewise constant over unit cells
anchored at their top-left lattice point, so a step aligned with cell
boundaries is exactly constant per cell. Each triangle is probed at a fixed
16-point pattern (centroids of its 4x4 barycentric refinement).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .numeric import bilinear_sample_many

OFFSET_CLAMP = 0.5 - 1e-3


def _triangle_sample_pattern(n: int = 4) -> np.ndarray:
    """Barycentric coordinates of the n^2 sub-triangle centroids."""
    bary = []
    for a in range(n):
        for b in range(n - a):  # upward sub-triangles
            bary.append((3 * a + 1, 3 * b + 1))
    for a in range(n - 1):
        for b in range(n - 1 - a):  # downward sub-triangles
            bary.append((3 * a + 2, 3 * b + 2))
    out = []
    for lb, lc in bary:
        lam_b = lb / (3.0 * n)
        lam_c = lc / (3.0 * n)
        out.append((1.0 - lam_b - lam_c, lam_b, lam_c))
    return np.array(out)


TRIANGLE_SAMPLES = _triangle_sample_pattern()


@dataclass(frozen=True)
class DeformableGrid:
    """Triangulated vertex lattice with per-vertex deformation offsets."""

    height: int
    width: int
    vertices: np.ndarray  # (V, 2) deformed (x, y) positions
    offsets: np.ndarray  # (V, 2) applied offsets relative to the lattice
    triangles: np.ndarray  # (T, 3) vertex ids, positive orientation
    adjacency: tuple[tuple[int, ...], ...]

    @property
    def n_vertices(self) -> int:
        return self.height * self.width

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def lattice(self) -> np.ndarray:
        """Undeformed (x, y) vertex positions."""
        jj, ii = np.meshgrid(np.arange(self.width), np.arange(self.height))
        return np.stack([jj.ravel(), ii.ravel()], axis=1).astype(np.float64)


def build_grid(height: int, width: int) -> DeformableGrid:
    """Undeformed grid with checkerboard-alternating cell diagonals."""
    if height < 2 or width < 2:
        raise ValueError("grid needs at least 2x2 vertices")

    def vid(i: int, j: int) -> int:
        return i * width + j

    triangles = []
    for i in range(height - 1):
        for j in range(width - 1):
            tl, tr = vid(i, j), vid(i, j + 1)
            bl, br = vid(i + 1, j), vid(i + 1, j + 1)
            if (i + j) % 2 == 0:  # diagonal tl-br
                triangles.append((tl, tr, br))
                triangles.append((tl, br, bl))
            else:  # diagonal tr-bl
                triangles.append((tl, tr, bl))
                triangles.append((tr, br, bl))
    tri = np.array(triangles, dtype=np.int64)

    neighbors: list[set[int]] = [set() for _ in range(height * width)]
    for a, b, c in triangles:
        for u, v in ((a, b), (b, c), (c, a)):
            neighbors[u].add(v)
            neighbors[v].add(u)
    adjacency = tuple(tuple(sorted(ns)) for ns in neighbors)

    jj, ii = np.meshgrid(np.arange(width), np.arange(height))
    vertices = np.stack([jj.ravel(), ii.ravel()], axis=1).astype(np.float64)
    return DeformableGrid(
        height=height,
        width=width,
        vertices=vertices,
        offsets=np.zeros((height * width, 2)),
        triangles=tri,
        adjacency=adjacency,
    )


def triangle_areas(grid: DeformableGrid) -> np.ndarray:
    """Signed shoelace area of every triangle at the deformed positions."""
    p0 = grid.vertices[grid.triangles[:, 0]]
    p1 = grid.vertices[grid.triangles[:, 1]]
    p2 = grid.vertices[grid.triangles[:, 2]]
    return 0.5 * (
        (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
        - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1])
    )


def apply_offsets(grid: DeformableGrid, raw: np.ndarray) -> DeformableGrid:
    """Deform the lattice by per-vertex offsets, keeping the geometry valid.

    Raw offsets are clamped per component to ±``OFFSET_CLAMP``; vertices on
    the grid boundary keep their cross-boundary component at zero (corners
    stay fixed) so the outer rectangle is preserved. If the clamped offsets
    would still invert a triangle, the offsets of that triangle's vertices are
    halved repeatedly until every signed area is positive.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape != (grid.n_vertices, 2):
        raise ValueError(
            f"expected offsets of shape {(grid.n_vertices, 2)}, got {raw.shape}"
        )
    off = np.clip(raw, -OFFSET_CLAMP, OFFSET_CLAMP)

    idx = np.arange(grid.n_vertices)
    row = idx // grid.width
    col = idx % grid.width
    off[(row == 0) | (row == grid.height - 1), 1] = 0.0
    off[(col == 0) | (col == grid.width - 1), 0] = 0.0

    base = grid.lattice()
    deformed = replace(grid, vertices=base + off, offsets=off)
    for _ in range(200):
        areas = triangle_areas(deformed)
        bad = areas <= 1e-9
        if not bad.any():
            return deformed
        culprit = np.unique(deformed.triangles[bad])
        off = off.copy()
        off[culprit] *= 0.5
        deformed = replace(grid, vertices=base + off, offsets=off)
    raise RuntimeError("offset repair did not converge")  # pragma: no cover


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def _check_features(features: np.ndarray, grid: DeformableGrid) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 3:
        raise ValueError("features must have shape (channels, height, width)")
    if features.shape[1] != grid.height or features.shape[2] != grid.width:
        raise ValueError(
            f"feature map {features.shape[1:]} does not match the "
            f"{grid.height}x{grid.width} vertex lattice"
        )
    return features


def _sample_points(grid: DeformableGrid) -> np.ndarray:
    """(T, 16, 2) probe locations of the fixed per-triangle pattern."""
    corners = grid.vertices[grid.triangles]  # (T, 3, 2)
    return np.einsum("sk,tkd->tsd", TRIANGLE_SAMPLES, corners)


def _sample_cells(grid: DeformableGrid, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map probe points to the unit cell holding them (row, col indices)."""
    cols = np.clip(np.floor(points[..., 0]).astype(np.int64), 0, grid.width - 1)
    rows = np.clip(np.floor(points[..., 1]).astype(np.int64), 0, grid.height - 1)
    return rows, cols


def _mean16(values: np.ndarray) -> np.ndarray:
    """Mean over the trailing 16-sample axis via a balanced pairwise tree.

    Exact when all samples are equal (plain reductions can be off by an ulp),
    so the losses vanish identically on per-cell-constant features.
    """
    out = values
    for _ in range(4):
        out = out.reshape(*out.shape[:-1], -1, 2).sum(axis=-1)
    return out[..., 0] / 16.0


def cell_feature_variance_loss(features: np.ndarray, grid: DeformableGrid) -> float:
    """Sum over triangles of the channel-averaged variance of probed features."""
    features = _check_features(features, grid)
    rows, cols = _sample_cells(grid, _sample_points(grid))
    values = features[:, rows, cols]  # (C, T, S)
    var = _mean16((values - _mean16(values)[..., None]) ** 2)
    return float(var.mean(axis=0).sum())


def cell_feature_variance_loss_grad(features: np.ndarray, grid: DeformableGrid) -> np.ndarray:
    """Gradient of :func:`cell_feature_variance_loss` w.r.t. the features."""
    features = _check_features(features, grid)
    c = features.shape[0]
    n_samples = TRIANGLE_SAMPLES.shape[0]
    rows, cols = _sample_cells(grid, _sample_points(grid))
    values = features[:, rows, cols]
    dvalues = (2.0 / (n_samples * c)) * (values - _mean16(values)[..., None])
    grad = np.zeros_like(features)
    ch = np.arange(c)[:, None, None]
    np.add.at(grad, (ch, rows[None], cols[None]), dvalues)
    return grad


def reconstruction_loss(features: np.ndarray, grid: DeformableGrid) -> float:
    """Mean squared error between probed features and their per-cell means.

    Equals :func:`cell_feature_variance_loss` divided by the triangle count
    (MSE-to-mean is variance; here it is averaged instead of summed over
    triangles).
    """
    features = _check_features(features, grid)
    rows, cols = _sample_cells(grid, _sample_points(grid))
    values = features[:, rows, cols]
    var = _mean16((values - _mean16(values)[..., None]) ** 2)
    return float(var.mean())


def reconstruction_loss_grad(features: np.ndarray, grid: DeformableGrid) -> np.ndarray:
    return cell_feature_variance_loss_grad(features, grid) / grid.n_triangles


def area_uniformity_loss(grid: DeformableGrid) -> float:
    """Sum of squared deviations of triangle areas from their mean."""
    areas = triangle_areas(grid)
    return float(((areas - areas.mean()) ** 2).sum())


def area_uniformity_loss_grad(grid: DeformableGrid) -> np.ndarray:
    """Gradient of :func:`area_uniformity_loss` w.r.t. vertex positions.

    Vertex positions are lattice plus offsets, so this is also the gradient
    with respect to the applied offsets.
    """
    areas = triangle_areas(grid)
    d_area = 2.0 * (areas - areas.mean())  # the mean term cancels in the sum
    tri = grid.triangles
    p0, p1, p2 = (grid.vertices[tri[:, k]] for k in range(3))
    grad = np.zeros_like(grid.vertices)
    d0 = 0.5 * np.stack([p1[:, 1] - p2[:, 1], p2[:, 0] - p1[:, 0]], axis=1)
    d1 = 0.5 * np.stack([p2[:, 1] - p0[:, 1], p0[:, 0] - p2[:, 0]], axis=1)
    d2 = 0.5 * np.stack([p0[:, 1] - p1[:, 1], p1[:, 0] - p0[:, 0]], axis=1)
    np.add.at(grad, tri[:, 0], d_area[:, None] * d0)
    np.add.at(grad, tri[:, 1], d_area[:, None] * d1)
    np.add.at(grad, tri[:, 2], d_area[:, None] * d2)
    return grad


def _adjacency_pairs(grid: DeformableGrid) -> np.ndarray:
    pairs = [(i, j) for i, nbrs in enumerate(grid.adjacency) for j in nbrs]
    return np.array(pairs, dtype=np.int64)


def neighbor_direction_loss(grid: DeformableGrid, raw: np.ndarray) -> float:
    """Sum over vertices and their neighbors of squared offset differences."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape != (grid.n_vertices, 2):
        raise ValueError(
            f"expected offsets of shape {(grid.n_vertices, 2)}, got {raw.shape}"
        )
    pairs = _adjacency_pairs(grid)
    diff = raw[pairs[:, 0]] - raw[pairs[:, 1]]
    return float((diff**2).sum())


def neighbor_direction_loss_grad(grid: DeformableGrid, raw: np.ndarray) -> np.ndarray:
    """Gradient of :func:`neighbor_direction_loss` w.r.t. the raw offsets."""
    raw = np.asarray(raw, dtype=np.float64)
    pairs = _adjacency_pairs(grid)
    diff = raw[pairs[:, 0]] - raw[pairs[:, 1]]
    grad = np.zeros_like(raw)
    np.add.at(grad, pairs[:, 0], 2.0 * diff)
    np.add.at(grad, pairs[:, 1], -2.0 * diff)
    return grad


# ---------------------------------------------------------------------------
# residual graph-convolution offset head
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GcnWeights:
    """Six residual graph-convolution blocks plus a 2-channel offset head."""

    blocks: tuple[np.ndarray, ...]
    head: np.ndarray

    def __post_init__(self) -> None:
        blocks = tuple(np.asarray(b, dtype=np.float64) for b in self.blocks)
        head = np.asarray(self.head, dtype=np.float64)
        if len(blocks) != 6:
            raise ValueError("expected six residual blocks")
        dim = blocks[0].shape[0]
        for b in blocks:
            if b.shape != (dim, dim) or not np.isfinite(b).all():
                raise ValueError("every block must be a finite (dim, dim) matrix")
        if head.shape != (dim, 2) or not np.isfinite(head).all():
            raise ValueError("head must be a finite (dim, 2) matrix")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "head", head)

    @property
    def dim(self) -> int:
        return self.blocks[0].shape[0]

    @classmethod
    def random(cls, dim: int, seed: int) -> "GcnWeights":
        rng = np.random.default_rng(seed)
        scale = 1.0 / math.sqrt(dim)
        blocks = tuple(rng.normal(0.0, scale, (dim, dim)) for _ in range(6))
        return cls(blocks=blocks, head=rng.normal(0.0, scale, (dim, 2)))

    @classmethod
    def zero_head(cls, dim: int, seed: int) -> "GcnWeights":
        w = cls.random(dim, seed)
        return cls(blocks=w.blocks, head=np.zeros((dim, 2)))


def normalized_adjacency(grid: DeformableGrid) -> np.ndarray:
    """Symmetric degree-normalized adjacency with self-loops."""
    v = grid.n_vertices
    a = np.zeros((v, v))
    for i, nbrs in enumerate(grid.adjacency):
        a[i, list(nbrs)] = 1.0
    a += np.eye(v)
    d = a.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


def residual_gcn_forward(
    grid: DeformableGrid, vertex_features: np.ndarray, weights: GcnWeights
) -> np.ndarray:
    """Predict raw per-vertex offsets from vertex features.

    Six residual blocks ``h <- relu(A_hat @ h @ W) + h`` followed by a linear
    head squashed by ``0.5 * tanh``, so each offset component stays in
    (-0.5, 0.5).
    """
    h = np.asarray(vertex_features, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] != grid.n_vertices:
        raise ValueError("vertex features must have shape (n_vertices, dim)")
    if h.shape[1] != weights.dim:
        raise ValueError(
            f"feature dim {h.shape[1]} does not match weights dim {weights.dim}"
        )
    a_hat = normalized_adjacency(grid)
    for w in weights.blocks:
        h = np.maximum(a_hat @ h @ w, 0.0) + h
    return 0.5 * np.tanh(h @ weights.head)


# ---------------------------------------------------------------------------
# polygon extraction and mask upsampling
# ---------------------------------------------------------------------------


def extract_region_polygons(grid: DeformableGrid, labels: np.ndarray) -> list[np.ndarray]:
    """Boundary polygons of the union of positively labeled triangles.

    Returns one closed ring per boundary loop as an (n, 2) array of deformed
    vertex positions (first vertex not repeated). Outer boundaries keep the
    triangles' positive shoelace orientation; hole boundaries come out with
    the opposite (negative) orientation. At pinch vertices the walk continues
    along the boundary edge of the same triangle fan, so rings never cross.
    """
    labels = np.asarray(labels)
    if labels.shape != (grid.n_triangles,):
        raise ValueError(
            f"expected {grid.n_triangles} cell labels, got shape {labels.shape}"
        )
    positive = grid.triangles[labels.astype(bool)]
    if positive.size == 0:
        return []

    directed = set()
    for a, b, c in positive:
        directed.add((int(a), int(b)))
        directed.add((int(b), int(c)))
        directed.add((int(c), int(a)))
    boundary = {e for e in directed if (e[1], e[0]) not in directed}

    outgoing: dict[int, list[tuple[int, int]]] = {}
    for e in sorted(boundary):
        outgoing.setdefault(e[0], []).append(e)

    def pick_next(prev: tuple[int, int], unused: set) -> tuple[int, int]:
        cands = [e for e in outgoing.get(prev[1], []) if e in unused]
        if not cands:
            raise RuntimeError("open boundary chain")  # pragma: no cover
        if len(cands) == 1:
            return cands[0]
        # Pinch vertex: take the first unused edge clockwise from the
        # reversed incoming direction, which stays inside the incoming fan.
        back = grid.vertices[prev[0]] - grid.vertices[prev[1]]
        ref = math.atan2(back[1], back[0])

        def turn(e: tuple[int, int]) -> float:
            d = grid.vertices[e[1]] - grid.vertices[e[0]]
            return (math.atan2(d[1], d[0]) - ref) % (2.0 * math.pi)

        return max(cands, key=turn)

    unused = set(boundary)
    rings: list[np.ndarray] = []
    for start in sorted(boundary):
        if start not in unused:
            continue
        unused.discard(start)
        loop = [start[0]]
        cur = start
        while cur[1] != start[0]:
            loop.append(cur[1])
            cur = pick_next(cur, unused)
            unused.discard(cur)
        rings.append(grid.vertices[np.array(loop, dtype=np.int64)].copy())
    return rings


def upsample_mask(mask: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Bilinearly upsample a soft mask and threshold it at 0.5.

    Source and target grids are aligned at their corners; identical dims
    reproduce the input. The target must not be smaller than the source.
    """
    mask = np.asarray(mask, dtype=np.float64)
    if mask.ndim != 2:
        raise ValueError("mask must be 2-D")
    h, w = mask.shape
    if target_h < h or target_w < w:
        raise ValueError("target dimensions must not be smaller than the source")
    rows = np.zeros(target_h) if target_h == 1 else np.arange(target_h) * (h - 1) / (target_h - 1)
    cols = np.zeros(target_w) if target_w == 1 else np.arange(target_w) * (w - 1) / (target_w - 1)
    soft = bilinear_sample_many(mask, rows[:, None], cols[None, :])
    return soft >= 0.5
