import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from btlab.geom2d import (
    ConvexPolygon,
    Ellipse,
    PolygonGrain,
    Rectangle,
    TorusWindow,
    convex_intersect,
    discretize,
    euler_characteristic,
    random_convex_polygon,
    rotate,
    square,
    union,
)
from btlab.minkowski import inclusion_exclusion_euler


def same_vertex_set(A, B, tol=1e-12):
    A, B = np.asarray(A), np.asarray(B)
    return len(A) == len(B) and all(np.min(np.hypot(*(B - a).T)) < tol for a in A)


# ---------------------------------------------------------------- polygons


def test_polygon_validation():
    with pytest.raises(ValueError):
        ConvexPolygon(np.array([[0, 0], [0, 1], [1, 0]]))  # clockwise
    with pytest.raises(ValueError):
        ConvexPolygon(np.array([[0, 0], [1, 0], [2, 0], [1, 1]]))  # collinear
    with pytest.raises(ValueError):
        ConvexPolygon(np.array([[0, 0], [1, 0]]))
    with pytest.raises(ValueError):
        ConvexPolygon(np.array([[0, 0], [1, 0], [1, 0], [0, 1]]))


def test_polygon_measures():
    P = square(2.0, center=(1.0, -1.0))
    assert P.area() == pytest.approx(4.0)
    assert P.perimeter() == pytest.approx(8.0)
    assert P.contains((1.0, -1.0)) and not P.contains((3.0, 0.0))
    assert P.diameter() == pytest.approx(2 * math.sqrt(2))


def test_rotate_identity_and_quarter_turn():
    P = square(1.0)
    assert np.allclose(rotate(P, 0.0).vertices, P.vertices)
    T = ConvexPolygon(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]))
    assert np.allclose(rotate(T, math.pi / 2).vertices[0], [0.0, 1.0], atol=1e-15)


def test_rotate_half_turn_rectangle_symmetry():
    P = discretize(Rectangle(2.0, 1.0))
    assert same_vertex_set(rotate(P, math.pi).vertices, P.vertices)


# ---------------------------------------------------------------- grains


def test_discretize_circle_four_points():
    P = discretize(Ellipse(1.0, 1.0, m=8))
    assert P.n == 8
    # spec-sized grain with the minimum m = 8 is fine; smaller m is rejected
    with pytest.raises(ValueError):
        Ellipse(1.0, 1.0, m=4)


def test_discretize_ellipse_area():
    P = discretize(Ellipse(1 / 20, 1 / 80, m=30))
    expected = 0.5 * 30 * (1 / 20) * (1 / 80) * math.sin(2 * math.pi / 30)
    assert P.n == 30
    assert P.area() == pytest.approx(expected, rel=1e-13)
    assert expected == pytest.approx(0.0019490, rel=1e-4)


def test_discretize_rectangle_full_sides():
    P = discretize(Rectangle(2.0, 1.0))
    assert same_vertex_set(P.vertices, [[1, 0.5], [-1, 0.5], [-1, -0.5], [1, -0.5]])
    R = Rectangle.from_semi_axes(0.01, 0.0025)
    assert (R.a, R.b) == (0.02, 0.005)


def test_grain_validation():
    with pytest.raises(ValueError):
        Ellipse(1.0, 2.0)
    with pytest.raises(ValueError):
        Rectangle(0.0, 1.0)


def test_polygon_grain_hashable():
    a = PolygonGrain(square(1.0))
    b = PolygonGrain(square(1.0))
    assert a == b and hash(a) == hash(b)


# ---------------------------------------------------------------- intersections


def test_convex_intersect_cases():
    P = square(1.0, center=(0.5, 0.5))
    assert convex_intersect(P, P).area() == pytest.approx(1.0)
    assert convex_intersect(P, square(1.0, center=(3.0, 0.5))) is None
    Q = square(1.0, center=(1.0, 1.0))
    I = convex_intersect(P, Q)
    assert I.area() == pytest.approx(0.25)


@given(st.integers(0, 10_000))
def test_convex_intersect_area_bound(seed):
    rng = np.random.default_rng(seed)
    P = random_convex_polygon(rng, 7)
    Q = random_convex_polygon(rng, 7).translate(rng.uniform(-1, 1, 2))
    I = convex_intersect(P, Q)
    if I is not None:
        assert I.area() <= min(P.area(), Q.area()) + 1e-12
        # every vertex of the intersection lies in both polygons
        assert all(P.contains(v, tol=1e-9) and Q.contains(v, tol=1e-9) for v in I.vertices)


# ---------------------------------------------------------------- planar unions


def test_union_single_square():
    R = union([square(1.0)])
    assert len(R.loops) == 1 and R.area == pytest.approx(1.0)
    assert euler_characteristic(R) == 1


def test_union_two_offset_squares():
    R = union([square(1.0), square(1.0, center=(0.5, 0.0))])
    assert len(R.loops) == 1
    assert R.area == pytest.approx(1.5)
    assert R.boundary_length() == pytest.approx(5.0)


def test_union_disks_enclosing_hole():
    # corners of a 0.5-spaced square: the centre is at distance 0.354 > 0.3
    D = discretize(Ellipse(0.3, 0.3, m=30))
    R = union([(D, (x, y)) for x in (0.0, 0.5) for y in (0.0, 0.5)])
    assert len(R.loops) == 2
    assert euler_characteristic(R) == 0
    assert not R.contains((0.25, 0.25))
    assert R.contains((0.0, 0.25))


def test_union_empty():
    R = union([])
    assert R.area == 0.0 and euler_characteristic(R) == 0


def test_union_idempotent():
    rng = np.random.default_rng(3)
    polys = [random_convex_polygon(rng, 6).translate(rng.uniform(0, 2, 2)) for _ in range(5)]
    a, b = union(polys), union(polys + [polys[2]])
    assert a.area == pytest.approx(b.area, rel=1e-12)
    assert euler_characteristic(a) == euler_characteristic(b)


def test_union_disjoint_area_additive():
    polys = [square(0.5, center=(i, 0.0)) for i in range(4)]
    R = union(polys)
    assert R.area == pytest.approx(4 * 0.25)
    assert euler_characteristic(R) == 4


@pytest.mark.parametrize("seed", range(25))
def test_gauss_bonnet_matches_inclusion_exclusion(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 11))
    polys = [random_convex_polygon(rng, 8, 0.3).translate(rng.uniform(0, 1.5, 2)) for _ in range(n)]
    assert euler_characteristic(union(polys)) == inclusion_exclusion_euler(polys)


# ---------------------------------------------------------------- torus


def test_torus_window_requires_fit():
    with pytest.raises(ValueError):
        union([(square(1.0), (0.5, 0.5))], TorusWindow(1.2))


def test_torus_grain_across_corner():
    W = TorusWindow(4.0)
    R = union([(square(1.0), (0.0, 0.0))], W)
    assert R.area == pytest.approx(1.0)
    assert euler_characteristic(R) == 1
    assert R.boundary_length() == pytest.approx(4.0)


def test_torus_wrapping_strip_has_zero_euler_characteristic():
    # three overlapping rectangles closing a horizontal band around the torus
    W = TorusWindow(3.0)
    bar = discretize(Rectangle(1.4, 0.5))
    R = union([(bar, (x, 1.0)) for x in (0.5, 1.5, 2.5)], W)
    assert R.area == pytest.approx(3.0 * 0.5)
    assert R.boundary_length() == pytest.approx(6.0)
    assert euler_characteristic(R) == 0
    assert len(R.loops) == 2


def test_torus_translation_equivariance():
    rng = np.random.default_rng(11)
    W = TorusWindow(3.0)
    grains = [(random_convex_polygon(rng, 6, 0.4), rng.uniform(0, 3, 2)) for _ in range(12)]
    shift = np.array([1.234, -0.77])
    a = union(grains, W)
    b = union([(P, c + shift) for P, c in grains], W)
    assert a.area == pytest.approx(b.area, rel=1e-10)
    assert a.boundary_length() == pytest.approx(b.boundary_length(), rel=1e-10)
    assert euler_characteristic(a) == euler_characteristic(b)


def test_torus_matches_plane_when_away_from_frame():
    rng = np.random.default_rng(5)
    shapes = [random_convex_polygon(rng, 6, 0.3) for _ in range(6)]
    centers = rng.uniform(1.0, 2.0, (6, 2))
    planar = union([P.translate(c) for P, c in zip(shapes, centers)])
    torus = union(list(zip(shapes, centers)), TorusWindow(3.0))
    assert torus.area == pytest.approx(planar.area, rel=1e-12)
    assert euler_characteristic(torus) == euler_characteristic(planar)


def test_torus_full_cover():
    W = TorusWindow(4.0)
    big = discretize(Rectangle(1.5, 1.5))
    ticks = [0.5, 0.5 + 4 / 3, 0.5 + 8 / 3]
    R = union([(big, (x, y)) for x in ticks for y in ticks], W)
    assert R.area == pytest.approx(16.0)
    assert euler_characteristic(R) == 0 and R.loops == ()


def test_turning_angles_of_convex_loop_sum_to_two_pi():
    R = union([discretize(Ellipse(1.0, 0.4, m=17))])
    assert R.turning_angles().sum() == pytest.approx(2 * math.pi, abs=1e-12)
