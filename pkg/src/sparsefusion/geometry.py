"""Geometric primitives: pinhole cameras, oriented 3D boxes, 2D boxes.

Conventions
-----------
World frame is right-handed with z up. A camera maps a world point ``p`` to
its own frame with ``X = R @ p + t`` where the camera frame has x to the
right, y down and z along the optical axis. Pixel coordinates follow
``u = fx * X / Z + cx`` and ``v = fy * Y / Z + cy``.

A :class:`Box3` has dimensions ``(w, l, h)`` measured along the box-frame
x, y and z axes, where the box frame is the world frame rotated by ``yaw``
about z and translated to ``center``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

DIM_FLOOR = 0.05
MIN_DEPTH = 1e-6


def wrap_angle(a):
    """Wrap an angle (or array of angles) into ``(-pi, pi]``.

    Angles already in range are returned unchanged, bit for bit.
    """
    a = np.asarray(a, dtype=float)
    inside = (a > -np.pi) & (a <= np.pi)
    wrapped = np.where(inside, a, np.pi - np.mod(np.pi - a, 2.0 * np.pi))
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def angle_diff(a: float, b: float) -> float:
    """Absolute wrapped angular distance between two angles."""
    return abs(wrap_angle(a - b))


def rot_z(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Box3:
    """Oriented 3D box. ``yaw`` is wrapped to ``(-pi, pi]`` on construction."""

    center: np.ndarray
    dims: np.ndarray
    yaw: float = 0.0

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float).reshape(3)
        dims = np.asarray(self.dims, dtype=float).reshape(3)
        if not np.all(np.isfinite(center)):
            raise ValueError(f"box center must be finite, got {center}")
        if not (np.all(np.isfinite(dims)) and np.all(dims > 0)):
            raise ValueError(f"box dims must be positive, got {dims}")
        if not math.isfinite(self.yaw):
            raise ValueError(f"box yaw must be finite, got {self.yaw}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    @property
    def w(self) -> float:
        return float(self.dims[0])

    @property
    def l(self) -> float:  # noqa: E743
        return float(self.dims[1])

    @property
    def h(self) -> float:
        return float(self.dims[2])

    def volume(self) -> float:
        return float(np.prod(self.dims))

    def __eq__(self, other):
        if not isinstance(other, Box3):
            return NotImplemented
        return (np.array_equal(self.center, other.center)
                and np.array_equal(self.dims, other.dims)
                and self.yaw == other.yaw)

    def __hash__(self):
        return hash((tuple(self.center), tuple(self.dims), self.yaw))


@dataclass(frozen=True)
class Box2:
    """Axis-aligned image box in pixel coordinates."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if self.max_x < self.min_x or self.max_y < self.min_y:
            raise ValueError(f"invalid Box2 {self}")

    def area(self) -> float:
        return (self.max_x - self.min_x) * (self.max_y - self.min_y)

    def as_array(self) -> np.ndarray:
        return np.array([self.min_x, self.min_y, self.max_x, self.max_y])


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera with a rigid world-to-camera transform."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray
    image_w: int
    image_h: int
    _ortho_tol: float = field(default=1e-9, repr=False, compare=False)

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (self.image_w > 0 and self.image_h > 0):
            raise ValueError("image size must be positive")
        if np.max(np.abs(R @ R.T - np.eye(3))) > self._ortho_tol:
            raise ValueError("camera rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > self._ortho_tol:
            raise ValueError("camera rotation must have determinant 1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "image_w", int(self.image_w))
        object.__setattr__(self, "image_h", int(self.image_h))

    @property
    def position(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def __eq__(self, other):
        if not isinstance(other, CameraModel):
            return NotImplemented
        return (self.fx == other.fx and self.fy == other.fy
                and self.cx == other.cx and self.cy == other.cy
                and np.array_equal(self.rotation, other.rotation)
                and np.array_equal(self.translation, other.translation)
                and self.image_w == other.image_w
                and self.image_h == other.image_h)

    __hash__ = None


def look_camera(position, heading: float, image_w: int = 640, image_h: int = 360,
                hfov_deg: float = 60.0) -> CameraModel:
    """Level camera at ``position`` whose optical axis points along ``heading``
    (radians, world azimuth)."""
    c, s = math.cos(heading), math.sin(heading)
    R = np.array([[s, -c, 0.0],
                  [0.0, 0.0, -1.0],
                  [c, s, 0.0]])
    position = np.asarray(position, dtype=float)
    f = (image_w / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)
    return CameraModel(fx=f, fy=f, cx=image_w / 2.0, cy=image_h / 2.0,
                       rotation=R, translation=-R @ position,
                       image_w=image_w, image_h=image_h)


def camera_ring(n: int = 6, height: float = 1.6, image_w: int = 640,
                image_h: int = 360) -> list[CameraModel]:
    """``n`` level cameras evenly spaced in azimuth, jointly covering 360 deg."""
    return [look_camera((0.0, 0.0, height), 2.0 * math.pi * k / n,
                        image_w=image_w, image_h=image_h, hfov_deg=360.0 / n)
            for k in range(n)]


def project_points(points: np.ndarray, cam: CameraModel):
    """Vectorized projection.

    Returns:
        ``(uv, depth, valid)`` where ``uv`` is ``(N, 2)``, ``depth`` is the
        camera-frame Z and ``valid`` marks points in front of the camera.
        ``uv`` is NaN where not valid.
    """
    pc = cam.to_camera(np.asarray(points, dtype=float).reshape(-1, 3))
    depth = pc[:, 2]
    valid = depth > MIN_DEPTH
    uv = np.full((len(pc), 2), np.nan)
    z = depth[valid]
    uv[valid, 0] = cam.fx * pc[valid, 0] / z + cam.cx
    uv[valid, 1] = cam.fy * pc[valid, 1] / z + cam.cy
    return uv, depth, valid


def project(p, cam: CameraModel) -> Optional[tuple[float, float, float]]:
    """Project one world point; ``None`` if it is not in front of the camera."""
    uv, depth, valid = project_points(np.asarray(p, dtype=float)[None, :], cam)
    if not valid[0]:
        return None
    return float(uv[0, 0]), float(uv[0, 1]), float(depth[0])


def unproject(u: float, v: float, depth: float, cam: CameraModel) -> np.ndarray:
    if not depth > 0:
        raise ValueError(f"depth must be positive, got {depth}")
    pc = np.array([(u - cam.cx) / cam.fx * depth,
                   (v - cam.cy) / cam.fy * depth,
                   depth])
    return cam.rotation.T @ (pc - cam.translation)


def points_to_box_frame(points: np.ndarray, box: Box3) -> np.ndarray:
    local = np.asarray(points, dtype=float).reshape(-1, 3) - box.center
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    x = c * local[:, 0] + s * local[:, 1]
    y = -s * local[:, 0] + c * local[:, 1]
    return np.stack([x, y, local[:, 2]], axis=1)


def points_in_box3(points: np.ndarray, box: Box3) -> np.ndarray:
    """Boolean mask of points inside ``box`` (faces count as inside)."""
    local = points_to_box_frame(points, box)
    return np.all(np.abs(local) <= box.dims / 2.0, axis=1)


def point_in_box3(p, box: Box3) -> bool:
    return bool(points_in_box3(np.asarray(p, dtype=float)[None, :], box)[0])


# Corner sign pattern: index bits (x, y, z) with bit 0 -> x, bit 1 -> y,
# bit 2 -> z. Corners 0-3 are the bottom face, 4-7 the top face.
_CORNER_SIGNS = np.array([[(-1) ** (1 - ((k >> 0) & 1)),
                           (-1) ** (1 - ((k >> 1) & 1)),
                           (-1) ** (1 - ((k >> 2) & 1))] for k in range(8)],
                         dtype=float)


def box3_corners(box: Box3) -> np.ndarray:
    """The 8 corners as an ``(8, 3)`` array.

    Corner ``k`` has box-frame offset ``(sx*w/2, sy*l/2, sz*h/2)`` where
    ``sx``, ``sy``, ``sz`` are -1/+1 from bits 0, 1, 2 of ``k``.
    """
    local = _CORNER_SIGNS * (box.dims / 2.0)
    return local @ rot_z(box.yaw).T + box.center


def project_box3(box: Box3, cam: CameraModel) -> Optional[Box2]:
    """Hull of the projected corners lying in front of the camera (unclamped)."""
    uv, _, valid = project_points(box3_corners(box), cam)
    if not valid.any():
        return None
    uv = uv[valid]
    return Box2(float(uv[:, 0].min()), float(uv[:, 1].min()),
                float(uv[:, 0].max()), float(uv[:, 1].max()))


def iou2d(a: Box2, b: Box2) -> float:
    iw = min(a.max_x, b.max_x) - max(a.min_x, b.min_x)
    ih = min(a.max_y, b.max_y) - max(a.min_y, b.min_y)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area() + b.area() - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def _axis_aligned_fit(points: np.ndarray) -> Box3:
    lo, hi = points.min(axis=0), points.max(axis=0)
    dims = np.maximum(hi - lo, DIM_FLOOR)
    return Box3((lo + hi) / 2.0, dims, 0.0)


def fit_box_pca(points: np.ndarray, min_points: int = 3,
                rank_tol: float = 1e-6) -> Box3:
    """Fit an oriented box to a point set.

    Yaw follows the principal direction of the XY covariance. Extents are the
    bounds in that rotated frame (floored at ``DIM_FLOOR``) and the center is
    the midpoint of the bounds. Too few points or a rank-deficient XY
    covariance fall back to an axis-aligned fit.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(points) == 0:
        raise ValueError("cannot fit a box to an empty point set")
    if len(points) < min_points:
        return _axis_aligned_fit(points)
    xy = points[:, :2] - points[:, :2].mean(axis=0)
    cov = xy.T @ xy / len(points)
    evals, evecs = np.linalg.eigh(cov)
    if evals[1] <= 0 or evals[0] / evals[1] < rank_tol:
        return _axis_aligned_fit(points)
    major = evecs[:, 1]
    yaw = wrap_angle(math.atan2(major[1], major[0]))
    # Canonical sign so the fit does not depend on the eigensolver's choice.
    if yaw <= -math.pi / 2 or yaw > math.pi / 2:
        yaw = wrap_angle(yaw + math.pi)
    c, s = math.cos(yaw), math.sin(yaw)
    x = c * points[:, 0] + s * points[:, 1]
    y = -s * points[:, 0] + c * points[:, 1]
    local = np.stack([x, y, points[:, 2]], axis=1)
    lo, hi = local.min(axis=0), local.max(axis=0)
    mid = (lo + hi) / 2.0
    center = np.array([c * mid[0] - s * mid[1], s * mid[0] + c * mid[1], mid[2]])
    return Box3(center, np.maximum(hi - lo, DIM_FLOOR), yaw)


def sample_box_surface(box: Box3, n: int, rng: np.random.Generator,
                       include_bottom: bool = False) -> np.ndarray:
    """Uniform samples on the box faces (by default the bottom face is skipped)."""
    w, l, h = box.dims
    # (fixed axis, sign, area)
    faces = [(2, 1.0, w * l), (0, 1.0, l * h), (0, -1.0, l * h),
             (1, 1.0, w * h), (1, -1.0, w * h)]
    if include_bottom:
        faces.append((2, -1.0, w * l))
    areas = np.array([f[2] for f in faces])
    which = rng.choice(len(faces), size=n, p=areas / areas.sum())
    local = (rng.random((n, 3)) - 0.5) * box.dims
    axes = np.array([f[0] for f in faces])[which]
    signs = np.array([f[1] for f in faces])[which]
    local[np.arange(n), axes] = signs * box.dims[axes] / 2.0
    return local @ rot_z(box.yaw).T + box.center


def surface_area(dims: Sequence[float], include_bottom: bool = False) -> float:
    w, l, h = dims
    area = w * l + 2.0 * (w * h + l * h)
    return area + (w * l if include_bottom else 0.0)
