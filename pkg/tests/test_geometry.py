import numpy as np
import pytest
from scipy.spatial import cKDTree

from trajcomply.errors import ValidationError
from trajcomply.geometry import (
    DrivableArea,
    Polygon,
    edge_distances,
    point_in_area,
    points_in_area,
    signed_distance,
    signed_distance_batch,
)

import naive
from conftest import query_points, sample_boundary, star_polygon

UNIT_SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


@pytest.fixture
def square():
    return DrivableArea([UNIT_SQUARE])


def random_area(rng, **kw):
    return DrivableArea([star_polygon(rng, **kw)])


class TestPolygonValidation:
    def test_too_few_vertices(self):
        with pytest.raises(ValidationError, match="at least 3"):
            Polygon([(0, 0), (1, 0)])

    def test_duplicate_consecutive_vertices(self):
        with pytest.raises(ValidationError, match="coincide"):
            Polygon([(0, 0), (0, 0), (1, 1), (0, 1)])

    def test_closing_edge_duplicate(self):
        # last vertex equals the first: the implicit closing edge is degenerate
        with pytest.raises(ValidationError, match="coincide"):
            Polygon([(0, 0), (1, 0), (1, 1), (0, 0)])

    def test_non_finite(self):
        with pytest.raises(ValidationError, match="finite"):
            Polygon([(0, 0), (np.nan, 0), (1, 1)])

    def test_empty_area(self):
        with pytest.raises(ValidationError, match="at least one polygon"):
            DrivableArea([])

    def test_overlap_warning(self):
        with pytest.warns(UserWarning, match="overlap"):
            DrivableArea([UNIT_SQUARE, [(0.5, 0.5), (2.0, 0.5), (2.0, 2.0)]])


class TestPointInArea:
    def test_square_center(self, square):
        assert point_in_area((0.5, 0.5), square) is True

    def test_outside_x_range(self, square):
        assert point_in_area((2.0, 0.5), square) is False

    def test_agrees_with_winding_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            poly = star_polygon(rng)
            area = DrivableArea([poly])
            pts = query_points(rng, [poly], 2000)
            off_edge = edge_distances(pts, area).min(axis=1) > 1e-7
            got = points_in_area(pts, area)
            want = np.array([naive.winding_number(x, y, poly) != 0 for x, y in pts])
            assert np.array_equal(got[off_edge], want[off_edge])

    def test_scalar_matches_batch(self):
        rng = np.random.default_rng(12)
        poly = star_polygon(rng)
        area = DrivableArea([poly])
        pts = query_points(rng, [poly], 500)
        batch = points_in_area(pts, area)
        for p, want in zip(pts, batch):
            assert point_in_area(p, area) == want


class TestSignedDistance:
    def test_square_center_tiebreak(self, square):
        res = signed_distance((0.5, 0.5), square)
        assert res.distance == pytest.approx(-0.5, abs=1e-12)
        # all four edges are 0.5 away; the lowest edge index (bottom) wins
        assert res.nearest_point == pytest.approx([0.5, 0.0], abs=1e-12)
        assert res.gradient == pytest.approx([0.0, -1.0], abs=1e-12)

    def test_axis_aligned_offset(self, square):
        res = signed_distance((2.0, 0.5), square)
        assert res.distance == pytest.approx(1.0, abs=1e-12)
        assert res.nearest_point == pytest.approx([1.0, 0.5], abs=1e-12)
        assert res.gradient == pytest.approx([1.0, 0.0], abs=1e-12)

    def test_corner(self, square):
        res = signed_distance((2.0, 2.0), square)
        assert res.distance == pytest.approx(np.sqrt(2.0), abs=1e-12)
        assert res.nearest_point == pytest.approx([1.0, 1.0], abs=1e-12)

    def test_distance_magnitude_matches_naively_stacked_edges(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            poly = star_polygon(rng)
            area = DrivableArea([poly])
            pts = query_points(rng, [poly], 200)
            res = signed_distance_batch(pts, area)
            for (x, y), d in zip(pts, res.distance):
                assert d == pytest.approx(naive.signed_distance(x, y, [poly]), abs=1e-12)

    def test_magnitude_against_dense_boundary_sampling(self):
        rng = np.random.default_rng(14)
        for _ in range(5):
            poly = star_polygon(rng)
            area = DrivableArea([poly])
            pts = query_points(rng, [poly], 1000)
            res = signed_distance_batch(pts, area)
            tree = cKDTree(sample_boundary([poly], 1e-4))
            ref, _ = tree.query(pts)
            np.testing.assert_allclose(np.abs(res.distance), ref, atol=1e-4)

    def test_nearest_point_distance_consistency(self):
        rng = np.random.default_rng(15)
        area = random_area(rng)
        pts = query_points(rng, [area.polygons[0].vertices], 500)
        res = signed_distance_batch(pts, area)
        gap = np.linalg.norm(pts - res.nearest_point, axis=1)
        np.testing.assert_allclose(np.abs(res.distance), gap, atol=1e-9)

    def test_gradient_is_unit(self):
        rng = np.random.default_rng(16)
        area = random_area(rng)
        pts = query_points(rng, [area.polygons[0].vertices], 500)
        res = signed_distance_batch(pts, area)
        norms = np.linalg.norm(res.gradient, axis=1)
        off = np.abs(res.distance) > 0
        np.testing.assert_allclose(norms[off], 1.0, atol=1e-12)


class TestFieldProperties:
    def test_lipschitz(self):
        rng = np.random.default_rng(17)
        area = random_area(rng)
        p = query_points(rng, [area.polygons[0].vertices], 400)
        q = query_points(rng, [area.polygons[0].vertices], 400)
        dp = signed_distance_batch(p, area).distance
        dq = signed_distance_batch(q, area).distance
        assert np.all(np.abs(dp - dq) <= np.linalg.norm(p - q, axis=1) + 1e-9)

    def test_sign_consistency(self):
        rng = np.random.default_rng(18)
        area = random_area(rng)
        pts = query_points(rng, [area.polygons[0].vertices], 1000)
        res = signed_distance_batch(pts, area)
        inside = points_in_area(pts, area)
        off = np.abs(res.distance) > 1e-9
        assert np.array_equal(res.distance[off] < 0, inside[off])

    def test_gradient_finite_differences(self):
        rng = np.random.default_rng(19)
        h = 1e-5
        checked = 0
        for _ in range(5):
            area = random_area(rng)
            pts = query_points(rng, [area.polygons[0].vertices], 200)
            dist = edge_distances(pts, area)
            two = np.sort(dist, axis=1)[:, :2]
            ambiguous = two[:, 1] - two[:, 0] < 1e-6
            res = signed_distance_batch(pts, area)
            for p, grad, d, amb in zip(pts, res.gradient, res.distance, ambiguous):
                if amb or abs(d) <= 1e-3:
                    continue
                for axis in range(2):
                    e = np.zeros(2)
                    e[axis] = h
                    fd = (signed_distance(p + e, area).distance
                          - signed_distance(p - e, area).distance) / (2 * h)
                    assert abs(fd - grad[axis]) < 1e-4
                checked += 1
        assert checked > 300

    def test_translation_equivariance(self):
        rng = np.random.default_rng(20)
        poly = star_polygon(rng)
        area = DrivableArea([poly])
        pts = query_points(rng, [poly], 200)
        for _ in range(5):
            v = rng.uniform(-10, 10, 2)
            shifted = DrivableArea([poly + v])
            d0 = signed_distance_batch(pts, area).distance
            d1 = signed_distance_batch(pts + v, shifted).distance
            np.testing.assert_allclose(d1, d0, atol=1e-12)


class TestGridExactness:
    """The grid-accelerated scalar path must be bit-identical to the batch scan."""

    def test_scalar_equals_batch_bitwise(self):
        rng = np.random.default_rng(21)
        for _ in range(8):
            polys = [star_polygon(rng, center=(0, 0)),
                     star_polygon(rng, r_min=0.5, r_max=1.5, center=(8.0, 1.0))]
            area = DrivableArea(polys)
            pts = query_points(rng, polys, 400, pad=3.0)
            batch = signed_distance_batch(pts, area)
            for i, p in enumerate(pts):
                one = signed_distance(p, area)
                assert one.distance == batch.distance[i]
                assert np.array_equal(one.nearest_point, batch.nearest_point[i])
                assert np.array_equal(one.gradient, batch.gradient[i])

    def test_far_away_points(self):
        rng = np.random.default_rng(22)
        area = random_area(rng)
        for p in [(500.0, 500.0), (-300.0, 2.0), (0.0, -1000.0)]:
            one = signed_distance(np.asarray(p), area)
            batch = signed_distance_batch(np.asarray([p]), area)
            assert one.distance == batch.distance[0]
            assert np.array_equal(one.nearest_point, batch.nearest_point[0])
