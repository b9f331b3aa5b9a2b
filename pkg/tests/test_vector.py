import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (buffer_membership, mbr_pair_directions, mbr_rotation_scan, monte_carlo_area,
                     winding_number)
from urbanlabel.vector import (GeometryError, GridIndex, PointObject, Polygon2D, TopoMap, convex_hull,
                               inflate_polygon, min_bounding_rect, point_in_polygon, points_in_polygon,
                               query_index)

UNIT = Polygon2D.rectangle(0, 0, 1, 1)


def star_polygon(rng, n=None, cx=0.0, cy=0.0):
    """Random simple (star-shaped) polygon."""
    n = n or int(rng.integers(3, 14))
    # jittered even spacing keeps consecutive vertices well apart
    ang = (np.arange(n) + rng.uniform(0.1, 0.9, n)) * (2 * math.pi / n)
    rad = rng.uniform(1.0, 5.0, n)
    return np.column_stack((cx + rad * np.cos(ang), cy + rad * np.sin(ang)))


def test_unit_square_membership():
    assert point_in_polygon(UNIT, 0.5, 0.5)
    assert not point_in_polygon(UNIT, 1.5, 0.5)


def test_boundary_counts_inside():
    assert point_in_polygon(UNIT, 1.0, 0.5)
    assert point_in_polygon(UNIT, 0.0, 0.0)
    assert points_in_polygon(UNIT, np.array([1.0, 0.5]), np.array([0.3, 1.0])).all()


def test_hole_is_outside():
    sq = Polygon2D(np.array([[0, 0], [4, 0], [4, 4], [0, 4]], float),
                   (np.array([[1, 1], [3, 1], [3, 3], [1, 3]], float),))
    assert not point_in_polygon(sq, 2, 2)
    assert point_in_polygon(sq, 0.5, 2)
    assert sq.area == pytest.approx(12.0)


def test_orientation_normalised():
    cw = Polygon2D(np.array([[0, 0], [0, 1], [1, 1], [1, 0]], float))
    assert cw.area == pytest.approx(1.0)


def test_self_intersecting_rejected():
    with pytest.raises(GeometryError):
        Polygon2D(np.array([[0, 0], [1, 1], [1, 0], [0, 1]], float))


def test_scalar_and_vector_agree_with_winding_oracle(rng):
    for _ in range(20):
        ring = star_polygon(rng)
        poly = Polygon2D(ring)
        x = rng.uniform(-6, 6, 1000)
        y = rng.uniform(-6, 6, 1000)
        got = points_in_polygon(poly, x, y)
        ref = np.array([winding_number(poly.exterior, a, b) != 0 for a, b in zip(x, y)])
        assert np.array_equal(got, ref)
        for k in range(20):
            assert point_in_polygon(poly, x[k], y[k]) == got[k]


def test_inflate_identity():
    p = Polygon2D.rectangle(0, 0, 10, 10)
    q = inflate_polygon(p, 0.0)
    assert np.array_equal(q.exterior, p.exterior)


def test_inflate_square_half_meter():
    p = Polygon2D.rectangle(0, 0, 10, 10)
    q = inflate_polygon(p, 0.5)
    assert point_in_polygon(q, 10.3, 5.0)
    assert not point_in_polygon(q, 10.6, 5.0)
    ref = monte_carlo_area(buffer_membership(p.exterior, 0.5), (-1, -1, 11, 11))
    assert ref == pytest.approx(100 + 40 * 0.5 + math.pi * 0.25, abs=0.05)
    assert q.area == pytest.approx(120.785, abs=0.05)


def test_inflate_negative_rejected():
    with pytest.raises(ValueError):
        inflate_polygon(UNIT, -0.1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(0.05, 2.0))
def test_inflate_contains_original(seed, d):
    rng = np.random.default_rng(seed)
    poly = Polygon2D(star_polygon(rng))
    big = inflate_polygon(poly, d)
    ring = poly.exterior
    # vertices and edge samples of the original lie inside the inflated polygon
    t = np.linspace(0, 1, 7)[:, None]
    samples = np.vstack([a + t * (b - a) for a, b in zip(ring, np.roll(ring, -1, axis=0))])
    assert points_in_polygon(big, samples[:, 0], samples[:, 1]).all()
    assert big.area >= poly.area


def test_mbr_axis_aligned():
    pts = np.array([[0, 0], [4, 0], [4, 2], [0, 2]], float)
    length, width, angle = min_bounding_rect(pts)
    assert (length, width, angle) == pytest.approx((4, 2, 0), abs=1e-12)


def test_mbr_rotated_45():
    pts = np.array([[0, 0], [4, 0], [4, 2], [0, 2]], float)
    c = s = math.sqrt(0.5)
    rot = pts @ np.array([[c, s], [-s, c]])
    length, width, angle = min_bounding_rect(rot)
    assert abs(length - 4) < 1e-9 and abs(width - 2) < 1e-9 and abs(angle - math.pi / 4) < 1e-9


def test_mbr_random_box_vs_scan(rng):
    u = rng.uniform(0, 4.5, 200)
    v = rng.uniform(0, 1.8, 200)
    a = 0.3
    pts = np.column_stack((u * math.cos(a) - v * math.sin(a), u * math.sin(a) + v * math.cos(a)))
    length, width, _ = min_bounding_rect(pts)
    assert length <= 4.5 + 1e-9 and width <= 1.8 + 1e-9
    assert length * width <= mbr_rotation_scan(pts) + 1e-6


def test_mbr_degenerate():
    assert min_bounding_rect(np.array([[1.0, 1.0]] * 3)) == (0.0, 0.0, 0.0)
    length, width, angle = min_bounding_rect(np.array([[0, 0], [1, 1], [2, 2]], float))
    assert length == pytest.approx(math.sqrt(8)) and width == 0.0
    assert angle == pytest.approx(math.pi / 4)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_mbr_exact_and_rigid_invariant(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(0, rng.uniform(0.5, 3), (int(rng.integers(3, 40)), 2)) * [1.0, rng.uniform(0.2, 1)]
    length, width, angle = min_bounding_rect(pts)
    assert length >= width >= 0 and 0 <= angle < math.pi
    exact = mbr_pair_directions(pts)
    assert abs(length * width - exact) <= 1e-9 * max(exact, 1.0)
    t = rng.uniform(0, 2 * math.pi)
    m = np.array([[math.cos(t), math.sin(t)], [-math.sin(t), math.cos(t)]])
    moved = pts @ m + rng.uniform(-1e3, 1e3, 2)
    l2, w2, _ = min_bounding_rect(moved)
    assert abs(l2 * w2 - length * width) <= 1e-6 * max(length * width, 1e-12)


def test_convex_hull_prefilter_keeps_extremes(rng):
    pts = rng.uniform(-1, 1, (5000, 2))
    hull = convex_hull(pts)
    small = convex_hull(pts[:60])  # below the pre-filter threshold
    assert len(small) >= 3
    poly = Polygon2D(hull)
    assert points_in_polygon(poly, pts[:, 0], pts[:, 1]).all()


def test_grid_index_queries():
    idx = GridIndex(10.0)
    assert idx.query((0, 0, 1, 1)) == []
    idx.insert("a", (0, 0, 5, 5))
    idx.insert("b", (30, 30, 35, 40))
    assert idx.query((-1e9, -1e9, 1e9, 1e9)) == ["a", "b"]
    assert idx.query((4, 4, 6, 6)) == ["a"]
    assert idx.query((100, 100, 200, 200)) == []
    with pytest.raises(ValueError):
        idx.query((1, 0, 0, 1))


def test_topo_index_ids():
    t = TopoMap([Polygon2D.rectangle(0, 0, 5, 5)], [(Polygon2D.rectangle(0, 10, 50, 15), "road")],
                [PointObject("tree", 20, 20)])
    assert query_index(t, (-100, -100, 100, 100)) == [("footprint", 0), ("point", 0), ("road", 0)]
    assert query_index(t, (19, 19, 21, 21)) == [("point", 0)]
    assert query_index(TopoMap(), (0, 0, 1, 1)) == []
    assert t.geometry(("road", 0))[1] == "road"
    with pytest.raises(GeometryError):
        PointObject("bench", 0, 0)
