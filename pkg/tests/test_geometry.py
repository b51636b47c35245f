import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (halfspace_inside, halfspace_inside_batch, homogeneous_project, raster_iou,
                     raster_iou_separable, voxel_volume_iou)
from sparsefusion.geometry import (DIM_FLOOR, Box2, Box3, CameraModel, box3_corners, fit_box_pca,
                                   iou2d, look_camera, point_in_box3, points_in_box3, project,
                                   project_box3, rot_z, sample_box_surface, unproject, wrap_angle)


def random_camera(rng):
    pos = rng.uniform(-5, 5, 3)
    return look_camera(pos, rng.uniform(-math.pi, math.pi), image_w=640, image_h=480)


def random_box(rng, lo=0.3, hi=3.0, spread=5.0):
    return Box3(rng.uniform(-spread, spread, 3), rng.uniform(lo, hi, 3), rng.uniform(-math.pi, math.pi))


finite = st.floats(-50, 50, allow_nan=False)
positive = st.floats(0.1, 10)
angles = st.floats(-10, 10, allow_nan=False)


class TestTypes:
    def test_box3_wraps_yaw(self):
        assert Box3(np.zeros(3), np.ones(3), 3 * math.pi).yaw == pytest.approx(math.pi)
        assert Box3(np.zeros(3), np.ones(3), -math.pi).yaw == pytest.approx(math.pi)

    def test_in_range_yaw_kept_exactly(self):
        assert Box3(np.zeros(3), np.ones(3), 0.1).yaw == 0.1

    def test_box3_rejects_bad_dims(self):
        with pytest.raises(ValueError):
            Box3(np.zeros(3), np.array([1.0, 0.0, 1.0]))
        with pytest.raises(ValueError):
            Box3(np.array([np.nan, 0, 0]), np.ones(3))

    def test_box2_rejects_inverted(self):
        with pytest.raises(ValueError):
            Box2(1.0, 0.0, 0.0, 1.0)

    def test_camera_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            CameraModel(100, 100, 0, 0, np.diag([1.0, 1.0, 1.0 + 1e-6]), np.zeros(3), 10, 10)
        with pytest.raises(ValueError):
            CameraModel(100, 100, 0, 0, np.diag([1.0, 1.0, -1.0]), np.zeros(3), 10, 10)
        with pytest.raises(ValueError):
            CameraModel(0, 100, 0, 0, np.eye(3), np.zeros(3), 10, 10)

    @given(angles)
    def test_wrap_angle_range(self, a):
        w = wrap_angle(a)
        assert -math.pi < w <= math.pi
        assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
        assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)


class TestProjection:
    def test_optical_axis(self):
        cam = CameraModel(500, 500, 320, 240, np.eye(3), np.zeros(3), 640, 480)
        np.testing.assert_allclose(project([0, 0, 5], cam), (320, 240, 5.0))

    def test_behind_camera(self):
        cam = CameraModel(500, 500, 320, 240, np.eye(3), np.zeros(3), 640, 480)
        assert project([0, 0, -1], cam) is None
        assert project([0, 0, 1e-7], cam) is None

    def test_matches_homogeneous_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(500):
            cam = random_camera(rng)
            p = cam.position + rng.uniform(-20, 20, 3)
            got, want = project(p, cam), homogeneous_project(p, cam)
            if want is None:
                assert got is None
            else:
                np.testing.assert_allclose(got, want, atol=1e-9, rtol=0)

    def test_unproject_optical_axis(self):
        cam = look_camera((1, 2, 1.5), 0.7)
        p = unproject(cam.cx, cam.cy, 4.0, cam)
        axis = np.array([math.cos(0.7), math.sin(0.7), 0.0])
        np.testing.assert_allclose(p, cam.position + 4.0 * axis, atol=1e-12)

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        cam = random_camera(rng)
        u = rng.uniform(0, cam.image_w, 1000)
        v = rng.uniform(0, cam.image_h, 1000)
        d = rng.uniform(1e-3, 100, 1000)
        err = max(np.max(np.abs(np.array(project(unproject(a, b, c, cam), cam)) - [a, b, c]))
                  for a, b, c in zip(u, v, d))
        assert err < 1e-6

    @pytest.mark.parametrize("depth", [0.0, -1.0])
    def test_unproject_rejects_non_positive_depth(self, depth):
        with pytest.raises(ValueError):
            unproject(0, 0, depth, look_camera((0, 0, 0), 0))

    @settings(max_examples=200)
    @given(st.floats(0, 640), st.floats(0, 360), st.floats(1e-3, 200), st.floats(-math.pi, math.pi))
    def test_round_trip_property(self, u, v, d, heading):
        cam = look_camera((3, -2, 1.6), heading)
        got = project(unproject(u, v, d, cam), cam)
        np.testing.assert_allclose(got, (u, v, d), atol=1e-6, rtol=0)


class TestContainment:
    def test_center_and_face(self):
        b = Box3(np.array([1.0, 2.0, 0.5]), np.array([2.0, 4.0, 1.0]), 0.0)
        assert point_in_box3(b.center, b)
        assert point_in_box3([2.0, 2.0, 0.5], b)
        assert not point_in_box3([2.0 + 1e-9, 2.0, 0.5], b)

    def test_matches_halfspace_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(2000):
            b = random_box(rng)
            p = b.center + rng.uniform(-2.5, 2.5, 3)
            assert point_in_box3(p, b) == halfspace_inside(p, box3_corners(b))

    def test_batch_oracle_matches_scalar_oracle(self):
        rng = np.random.default_rng(8)
        boxes = [random_box(rng) for _ in range(300)]
        pts = np.array([b.center + rng.uniform(-2.5, 2.5, 3) for b in boxes])
        corners = np.array([box3_corners(b) for b in boxes])
        np.testing.assert_array_equal(halfspace_inside_batch(pts, corners),
                                      [halfspace_inside(p, c) for p, c in zip(pts, corners)])

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(3)
        b = random_box(rng)
        pts = b.center + rng.uniform(-2, 2, (300, 3))
        np.testing.assert_array_equal(points_in_box3(pts, b), [point_in_box3(p, b) for p in pts])

    @given(finite, finite, finite, positive, positive, positive, angles,
           angles, finite, finite, st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
    def test_rigid_invariance(self, cx, cy, cz, w, l, h, yaw, theta, tx, ty, ox, oy, oz):
        b = Box3(np.array([cx, cy, cz]), np.array([w, l, h]), yaw)
        p = b.center + np.array([ox * w, oy * l, oz * h]) * 0.6
        R = rot_z(theta)
        t = np.array([tx, ty, 1.0])
        moved = Box3(R @ b.center + t, b.dims, yaw + theta)
        # Points well inside or well outside; near-boundary points are not
        # stable under floating-point rigid motion.
        assert point_in_box3(p, b) == point_in_box3(R @ p + t, moved)

    @given(finite, finite, finite, positive, positive, positive, angles)
    def test_corners_inside_own_box(self, cx, cy, cz, w, l, h, yaw):
        b = Box3(np.array([cx, cy, cz]), np.array([w, l, h]), yaw)
        # Corners are exact up to rounding; allow it by shrinking the point.
        corners = box3_corners(b)
        shrunk = b.center + (corners - b.center) * (1 - 1e-12)
        assert points_in_box3(shrunk, b).all()


class TestCorners:
    def test_unit_box(self):
        c = box3_corners(Box3(np.zeros(3), np.ones(3), 0.0))
        assert {tuple(r) for r in c} == {(x, y, z) for x in (-.5, .5) for y in (-.5, .5) for z in (-.5, .5)}
        np.testing.assert_array_equal(c[:4, 2], -0.5)

    def test_yaw_pi_same_set(self):
        b0 = Box3(np.array([1.0, 2.0, 3.0]), np.array([1.0, 2.0, 3.0]), 0.0)
        b1 = Box3(b0.center, b0.dims, math.pi)
        a = np.array(sorted(map(tuple, np.round(box3_corners(b0), 9))))
        b = np.array(sorted(map(tuple, np.round(box3_corners(b1), 9))))
        np.testing.assert_allclose(a, b, atol=1e-9)

    def test_centroid_and_edges(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            b = random_box(rng)
            c = box3_corners(b)
            np.testing.assert_allclose(c.mean(axis=0), b.center, atol=1e-9)
            for bit, dim in zip(range(3), b.dims):
                for k in range(8):
                    if not (k >> bit) & 1:
                        assert abs(np.linalg.norm(c[k | (1 << bit)] - c[k]) - dim) < 1e-9


class TestProjectBox:
    def test_behind(self):
        cam = look_camera((0, 0, 0), 0.0)
        assert project_box3(Box3(np.array([-10.0, 0, 0]), np.ones(3)), cam) is None

    def test_symmetric_on_axis(self):
        cam = CameraModel(500, 500, 320, 240, np.eye(3), np.zeros(3), 640, 480)
        b = project_box3(Box3(np.array([0, 0, 10.0]), np.array([2.0, 1.0, 3.0])), cam)
        assert abs((b.min_x + b.max_x) / 2 - 320) < 1e-6
        assert abs((b.min_y + b.max_y) / 2 - 240) < 1e-6

    def test_hull_of_corner_projections(self):
        rng = np.random.default_rng(5)
        cam = look_camera((0, 0, 1.6), 0.0)
        for _ in range(200):
            b = Box3(np.array([rng.uniform(5, 40), rng.uniform(-10, 10), 0.8]),
                     rng.uniform(0.5, 4, 3), rng.uniform(-math.pi, math.pi))
            uv = np.array([p[:2] for p in map(lambda c: project(c, cam), box3_corners(b)) if p])
            got = project_box3(b, cam)
            np.testing.assert_allclose(got.as_array(),
                                       [*uv.min(axis=0), *uv.max(axis=0)], atol=1e-9)

    def test_not_clamped(self):
        cam = look_camera((0, 0, 1.6), 0.0)
        b = project_box3(Box3(np.array([5.0, 6.0, 1.0]), np.array([2.0, 4.0, 2.0])), cam)
        assert b.min_x < 0


class TestIoU2D:
    def test_identity_and_disjoint(self):
        a = Box2(0, 0, 2, 3)
        assert iou2d(a, a) == 1.0
        assert iou2d(a, Box2(5, 5, 6, 6)) == 0.0

    def test_half_offset(self):
        assert iou2d(Box2(0, 0, 1, 1), Box2(0.5, 0, 1.5, 1)) == pytest.approx(1 / 3, abs=1e-15)

    def test_zero_area(self):
        assert iou2d(Box2(1, 1, 1, 1), Box2(1, 1, 1, 1)) == 0.0

    def test_matches_raster_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            a = np.sort(rng.uniform(0, 10, (2, 2)), axis=0).T.ravel()[[0, 2, 1, 3]]
            b = np.sort(rng.uniform(0, 10, (2, 2)), axis=0).T.ravel()[[0, 2, 1, 3]]
            got = iou2d(Box2(*a), Box2(*b))
            assert abs(got - raster_iou(a, b)) < 2e-3
            assert raster_iou(a, b) == pytest.approx(raster_iou_separable(a, b), abs=1e-15)

    @given(*[st.floats(-100, 100)] * 4, *[st.floats(0, 50)] * 4)
    def test_properties(self, x0, y0, x1, y1, w0, h0, w1, h1):
        a, b = Box2(x0, y0, x0 + w0, y0 + h0), Box2(x1, y1, x1 + w1, y1 + h1)
        v = iou2d(a, b)
        assert 0.0 <= v <= 1.0
        assert v == iou2d(b, a)
        if a.area() > 0:
            assert iou2d(a, a) == 1.0


class TestFitBox:
    def test_rectangle_corners(self):
        pts = np.array([[x, y, z] for x in (1, 5) for y in (2, 4) for z in (0, 1)], dtype=float)
        b = fit_box_pca(pts)
        assert min(abs(wrap_angle(b.yaw)), abs(abs(b.yaw) - math.pi / 2)) < 1e-9
        np.testing.assert_allclose(sorted(b.dims[:2]), [2, 4], atol=1e-9)
        assert b.dims[2] == pytest.approx(1.0)
        np.testing.assert_allclose(b.center, [3, 3, 0.5], atol=1e-9)

    def test_single_point(self):
        b = fit_box_pca(np.array([[1.0, 2.0, 3.0]]))
        np.testing.assert_array_equal(b.dims, [DIM_FLOOR] * 3)
        np.testing.assert_array_equal(b.center, [1, 2, 3])
        assert b.yaw == 0.0

    def test_collinear_falls_back(self):
        pts = np.array([[t, 2 * t, 0.0] for t in range(5)])
        assert fit_box_pca(pts).yaw == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            fit_box_pca(np.zeros((0, 3)))

    def test_surface_samples_volume_iou(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            src = Box3(rng.uniform(-3, 3, 3), np.array([rng.uniform(0.6, 1.2), rng.uniform(1.5, 2.5),
                                                       rng.uniform(0.5, 1.5)]), rng.uniform(-math.pi, math.pi))
            pts = sample_box_surface(src, 500, rng)
            assert voxel_volume_iou(fit_box_pca(pts), src) >= 0.7

    @given(st.lists(st.tuples(finite, finite, finite), min_size=1, max_size=30))
    def test_output_invariants(self, pts):
        b = fit_box_pca(np.array(pts, dtype=float))
        assert np.all(b.dims >= DIM_FLOOR)
        assert -math.pi < b.yaw <= math.pi
        assert points_in_box3(np.array(pts) + 0.0, Box3(b.center, b.dims + 1e-6, b.yaw)).all()
