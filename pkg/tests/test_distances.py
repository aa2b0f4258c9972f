import numpy as np
import pytest

from layoutkit.distances import (
    avg_hausdorff,
    boundary_points,
    directed_hd,
    directed_hd_brute,
    hausdorff,
    hd95,
    nearest_distances,
    nearest_distances_brute,
)


def percentile_rule(values, q=95.0):
    """Independent statement of the documented linear percentile rule:
    h = (q/100) * (n-1), result d[f] + (h-f) * (d[f+1] - d[f])."""
    d = np.sort(np.asarray(values, float))
    h = (q / 100.0) * (len(d) - 1)
    f = int(np.floor(h))
    if f == len(d) - 1:
        return float(d[-1])
    return float(d[f] + (h - f) * (d[f + 1] - d[f]))


class TestDirectedHd:
    def test_identical_sets_zero(self):
        pts = np.array([[0.0, 0.0], [2.5, 1.0], [-3.0, 4.0]])
        assert directed_hd(pts, pts) == 0.0

    def test_single_euclidean_pair(self):
        assert directed_hd([[0, 0]], [[3, 4]]) == 5.0

    def test_two_point_example(self):
        assert directed_hd([[0, 0], [0, 2]], [[0, 0]]) == 2.0
        assert directed_hd_brute([[0, 0], [0, 2]], [[0, 0]]) == 2.0

    def test_indexed_equals_brute_exactly(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            x = rng.uniform(-100, 100, (int(rng.integers(1, 400)), 2))
            y = rng.uniform(-100, 100, (int(rng.integers(1, 400)), 2))
            assert directed_hd(x, y) == directed_hd_brute(x, y)
            assert np.array_equal(nearest_distances(x, y), nearest_distances_brute(x, y))

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            directed_hd(np.zeros((0, 2)), [[0, 0]])
        with pytest.raises(ValueError):
            directed_hd([[0, 0]], np.zeros((0, 2)))


class TestHausdorffFamily:
    def test_symmetry(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            x = rng.normal(size=(int(rng.integers(1, 50)), 2))
            y = rng.normal(size=(int(rng.integers(1, 50)), 2))
            assert hausdorff(x, y) == hausdorff(y, x)
            assert avg_hausdorff(x, y) == avg_hausdorff(y, x)
            assert hd95(x, y) == hd95(y, x)

    def test_hausdorff_example(self):
        assert hausdorff([[0, 0], [0, 2]], [[0, 0]]) == 2.0

    def test_identical_sets_zero_for_whole_family(self):
        pts = np.array([[0.5, 1.5], [3.0, -2.0], [7.0, 7.0]])
        assert hausdorff(pts, pts) == 0.0
        assert avg_hausdorff(pts, pts) == 0.0
        assert hd95(pts, pts) == 0.0

    def test_scale_equivariance_and_translation_invariance(self):
        rng = np.random.default_rng(29)
        x = rng.normal(size=(30, 2))
        y = rng.normal(size=(40, 2))
        t = np.array([17.0, -4.0])
        for fn in (hausdorff, avg_hausdorff, hd95):
            assert fn(3.0 * x, 3.0 * y) == pytest.approx(3.0 * fn(x, y), abs=1e-9)
            assert fn(x + t, y + t) == pytest.approx(fn(x, y), abs=1e-9)

    def test_avg_example(self):
        assert avg_hausdorff([[0, 0], [0, 2]], [[0, 0]]) == 0.5

    def test_ordering_on_random_sets(self):
        rng = np.random.default_rng(31)
        for _ in range(30):
            x = rng.uniform(0, 50, (int(rng.integers(2, 200)), 2))
            y = rng.uniform(0, 50, (int(rng.integers(2, 200)), 2))
            a, h9, h = avg_hausdorff(x, y), hd95(x, y), hausdorff(x, y)
            assert 0.0 <= a <= h9 + 1e-12
            assert h9 <= h + 1e-12

    def test_hd95_identity(self):
        pts = np.array([[float(i), 0.0] for i in range(95)])
        assert hd95(pts, pts) == 0.0

    def test_percentile_rule_on_explicit_multiset(self):
        # 95 zeros and 5 tens: the 95th percentile lands in the interpolation
        # band, rank 94.05 of the sorted 100 values
        multiset = np.array([0.0] * 95 + [10.0] * 5)
        expected = percentile_rule(multiset)
        assert expected == pytest.approx(0.5)
        # hd95 applies exactly this rule to the combined multiset
        assert float(np.percentile(multiset, 95.0)) == expected

    def test_hd95_interpolates_between_zero_and_max(self):
        # 14 shared points (zeros in both directions) plus 2 outliers at
        # distance 10: combined multiset of 28 zeros and 2 tens
        shared = np.array([[i * 100.0, 0.0] for i in range(14)])
        outliers = np.array([[0.0, 10.0], [100.0, 10.0]])
        x = np.vstack([shared, outliers])
        y = shared
        combined = np.concatenate([nearest_distances(x, y), nearest_distances(y, x)])
        assert sorted(combined.tolist()) == [0.0] * 28 + [10.0] * 2
        value = hd95(x, y)
        assert value == percentile_rule(combined)
        assert value == pytest.approx(5.5)
        assert 0.0 < value < 10.0
        assert value <= hausdorff(x, y)


class TestBoundaryPoints:
    def test_unit_square_spacing_one_gives_corners(self):
        square = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
        pts = boundary_points(square, 1.0)
        assert pts.shape == (4, 2)
        assert {tuple(p) for p in pts} == {(0, 0), (1, 0), (1, 1), (0, 1)}

    def test_spacing_larger_than_perimeter_keeps_vertices(self):
        square = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
        pts = boundary_points(square, 100.0)
        assert pts.shape == (4, 2)

    def test_point_count_tracks_perimeter_over_spacing(self):
        rect = np.array([[0, 0], [10, 0], [10, 6], [0, 6]], float)
        spacing = 0.5
        pts = boundary_points(rect, spacing)
        perimeter = 2 * (10 + 6)
        # every vertex plus interior points at multiples of the spacing:
        # exact count since every edge length is a multiple of the spacing
        assert len(pts) == perimeter / spacing

    def test_includes_original_vertices(self):
        tri = np.array([[0, 0], [7, 1], [3, 9]], float)
        pts = {tuple(p) for p in boundary_points(tri, 0.7)}
        for v in tri:
            assert tuple(v) in pts

    def test_uniform_spacing_within_edges(self):
        seg = np.array([[0, 0], [4, 0], [4, 3]], float)
        pts = boundary_points(seg, 1.0)
        first_edge = [p for p in pts if p[1] == 0.0 and 0 <= p[0] < 4]
        assert sorted(p[0] for p in first_edge) == [0.0, 1.0, 2.0, 3.0]

    def test_degenerate_polygon_rejected(self):
        with pytest.raises(ValueError):
            boundary_points(np.array([[0, 0], [1, 1]], float), 1.0)
        with pytest.raises(ValueError):
            boundary_points(np.zeros((3, 2)), 1.0)  # zero perimeter

    def test_nonpositive_spacing_rejected(self):
        square = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
        with pytest.raises(ValueError):
            boundary_points(square, 0.0)
