"""Deterministic synthetic scenes: ground-truth boxes, LiDAR points, camera
rigs and oracle 2D instance masks.

Random streams
--------------
Every random draw comes from ``stream(seed, op, key)``, a generator seeded by
``SeedSequence([seed, op, key])``. ``op`` is one of the ``OP_*`` codes below
and ``key`` is an instance id, camera index or mask ordinal, so the samples of
one object never depend on how many other objects the scene holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .geometry import (Box2, Box3, CameraModel, camera_ring, points_in_box3,
                       project_points, sample_box_surface, surface_area)

OP_PLACE = 1
OP_ATTR = 2
OP_POINTS = 3
OP_BACKGROUND = 4
OP_RENDER = 5
OP_NOISE_DROP = 6
OP_NOISE_SPURIOUS = 7
OP_NOISE_MERGE = 8
OP_SCORE = 9
OP_VOTE = 10

BACKGROUND = -1
MAX_PLACEMENT_ATTEMPTS = 10_000
RENDER_DENSITY_FACTOR = 20
# Surface samples sit this fraction inside the faces so that boundary-
# inclusive containment survives floating-point rotation.
_FACE_INSET = 1e-9


class SceneGenerationError(RuntimeError):
    pass


def stream(seed: int, op: int, key: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), op, int(key) + 1]))


@dataclass(frozen=True)
class ClassSpec:
    class_id: int
    name: str
    size_prior: tuple
    size_jitter: float = 0.1
    surface_point_rate: float = 25.0

    def __post_init__(self):
        if not all(s > 0 for s in self.size_prior):
            raise ValueError(f"{self.name}: size_prior must be positive")
        if not 0.0 <= self.size_jitter <= 0.5:
            raise ValueError(f"{self.name}: size_jitter must lie in [0, 0.5]")
        if not self.surface_point_rate > 0:
            raise ValueError(f"{self.name}: surface_point_rate must be positive")
        object.__setattr__(self, "size_prior", tuple(float(s) for s in self.size_prior))


DEFAULT_CLASSES = (
    ClassSpec(0, "car", (1.9, 4.5, 1.6)),
    ClassSpec(1, "truck", (2.5, 7.0, 3.0)),
    ClassSpec(2, "pedestrian", (0.7, 0.7, 1.8)),
    ClassSpec(3, "cyclist", (0.7, 1.8, 1.5)),
)


@dataclass(frozen=True)
class SceneConfig:
    range_m: float = 54.0
    n_objects: int = 8
    classes: tuple = DEFAULT_CLASSES
    cameras: tuple = field(default_factory=lambda: tuple(camera_ring()))
    background_points: int = 2000
    point_dropout: float = 0.0
    distance_attenuation_exp: float = 2.0
    min_center_gap: float = 10.0
    seed: int = 0
    # Objects keep this BEV distance from the sensor origin.
    ego_clearance_m: float = 5.0

    def __post_init__(self):
        if not self.range_m > 0:
            raise ValueError("range_m must be positive")
        if self.n_objects < 0:
            raise ValueError("n_objects must be non-negative")
        if self.min_center_gap < 0:
            raise ValueError("min_center_gap must be non-negative")
        if not 0.0 <= self.point_dropout <= 1.0:
            raise ValueError("point_dropout must lie in [0, 1]")
        if self.background_points < 0:
            raise ValueError("background_points must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        for name in ("range_m", "point_dropout", "distance_attenuation_exp",
                     "min_center_gap", "ego_clearance_m"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "cameras", tuple(self.cameras))

    def class_spec(self, class_id: int) -> ClassSpec:
        for spec in self.classes:
            if spec.class_id == class_id:
                return spec
        raise KeyError(f"unknown class_id {class_id}")

    def __eq__(self, other):
        if not isinstance(other, SceneConfig):
            return NotImplemented
        return all(getattr(self, f) == getattr(other, f) for f in (
            "range_m", "n_objects", "classes", "cameras", "background_points",
            "point_dropout", "distance_attenuation_exp", "min_center_gap",
            "seed", "ego_clearance_m"))

    __hash__ = None


@dataclass(frozen=True)
class GroundTruth:
    box: Box3
    class_id: int
    instance_id: int


@dataclass
class InstanceMask:
    """Binary instance mask of one camera.

    ``instance_id`` is ``None`` for spurious masks. ``bbox2`` spans the pixel
    footprints of the set bits: pixel ``(row, col)`` covers
    ``[col - 0.5, col + 0.5) x [row - 0.5, row + 0.5)``.
    """

    camera_index: int
    instance_id: Optional[int]
    class_id: int
    bitmap: np.ndarray
    bbox2: Box2 = None

    def __post_init__(self):
        self.bitmap = np.asarray(self.bitmap, dtype=bool)
        if not self.bitmap.any():
            raise ValueError("mask bitmap has no set bits")
        if self.bbox2 is None:
            self.bbox2 = tight_bbox(self.bitmap)

    @property
    def spurious(self) -> bool:
        return self.instance_id is None

    def __eq__(self, other):
        if not isinstance(other, InstanceMask):
            return NotImplemented
        return (self.camera_index == other.camera_index
                and self.instance_id == other.instance_id
                and self.class_id == other.class_id
                and self.bbox2 == other.bbox2
                and np.array_equal(self.bitmap, other.bitmap))


def tight_bbox(bitmap: np.ndarray) -> Box2:
    rows = np.flatnonzero(bitmap.any(axis=1))
    cols = np.flatnonzero(bitmap.any(axis=0))
    return Box2(cols[0] - 0.5, rows[0] - 0.5, cols[-1] + 0.5, rows[-1] + 0.5)


@dataclass
class Scene:
    gt: list
    points: np.ndarray
    point_instance: np.ndarray
    cameras: list
    masks: list
    config: SceneConfig = None

    @property
    def instance_ids(self) -> list:
        return [g.instance_id for g in self.gt]

    def gt_index(self, instance_id: int) -> int:
        for i, g in enumerate(self.gt):
            if g.instance_id == instance_id:
                return i
        raise KeyError(instance_id)

    def __eq__(self, other):
        if not isinstance(other, Scene):
            return NotImplemented
        return (self.gt == other.gt
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.point_instance, other.point_instance)
                and list(self.cameras) == list(other.cameras)
                and self.masks == other.masks
                and self.config == other.config)


@dataclass(frozen=True)
class MaskNoise:
    drop_prob: float = 0.0
    dilate_px: int = 0
    erode_px: int = 0
    spurious_prob: float = 0.0
    merge_prob: float = 0.0

    def __post_init__(self):
        for name in ("drop_prob", "spurious_prob", "merge_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.dilate_px < 0 or self.erode_px < 0:
            raise ValueError("dilate_px and erode_px must be non-negative")


# --------------------------------------------------------------------------
# generation

def expected_point_count(dims, rate: float, distance: float, exponent: float) -> int:
    d = max(float(distance), 1.0)
    return int(round(surface_area(dims) * rate * (10.0 / d) ** exponent))


def _sample_object(cfg: SceneConfig, instance_id: int):
    rng = stream(cfg.seed, OP_ATTR, instance_id)
    spec = cfg.classes[int(rng.integers(len(cfg.classes)))]
    jitter = 1.0 + spec.size_jitter * rng.uniform(-1.0, 1.0, size=3)
    dims = np.asarray(spec.size_prior) * jitter
    yaw = math.pi - rng.random() * 2.0 * math.pi
    return spec.class_id, dims, yaw


def place_objects(cfg: SceneConfig) -> list:
    """Sample non-overlapping object centers, classes, sizes and yaws."""
    placed: list[GroundTruth] = []
    attempts = 0
    for instance_id in range(cfg.n_objects):
        class_id, dims, yaw = _sample_object(cfg, instance_id)
        rng = stream(cfg.seed, OP_PLACE, instance_id)
        while True:
            attempts += 1
            if attempts > MAX_PLACEMENT_ATTEMPTS:
                raise SceneGenerationError(
                    f"could not place {cfg.n_objects} objects within range_m="
                    f"{cfg.range_m} under min_center_gap={cfg.min_center_gap} "
                    f"and ego_clearance_m={cfg.ego_clearance_m} after "
                    f"{MAX_PLACEMENT_ATTEMPTS} attempts")
            xy = rng.uniform(-cfg.range_m, cfg.range_m, size=2)
            if np.hypot(*xy) < cfg.ego_clearance_m:
                continue
            if cfg.min_center_gap > 0 and any(
                    np.hypot(*(g.box.center[:2] - xy)) < cfg.min_center_gap for g in placed):
                continue
            break
        center = np.array([xy[0], xy[1], dims[2] / 2.0])
        placed.append(GroundTruth(Box3(center, dims, yaw), class_id, instance_id))
    return placed


def sample_object_points(cfg: SceneConfig, gt: GroundTruth) -> np.ndarray:
    spec = cfg.class_spec(gt.class_id)
    n = expected_point_count(gt.box.dims, spec.surface_point_rate,
                             np.hypot(*gt.box.center[:2]), cfg.distance_attenuation_exp)
    rng = stream(cfg.seed, OP_POINTS, gt.instance_id)
    inset = Box3(gt.box.center, gt.box.dims * (1.0 - _FACE_INSET), gt.box.yaw)
    pts = sample_box_surface(inset, n, rng)
    if cfg.point_dropout > 0:
        pts = pts[rng.random(n) >= cfg.point_dropout]
    return pts


def build_scene(cfg: SceneConfig, gt: Sequence[GroundTruth], render: bool = True) -> Scene:
    """Sample LiDAR points (and oracle masks) for the given ground truth."""
    chunks, owners = [], []
    for g in gt:
        pts = sample_object_points(cfg, g)
        chunks.append(pts)
        owners.append(np.full(len(pts), g.instance_id, dtype=np.int64))
    rng = stream(cfg.seed, OP_BACKGROUND)
    n_bg = cfg.background_points
    bg = np.column_stack([rng.uniform(-cfg.range_m, cfg.range_m, size=(n_bg, 2)),
                          rng.uniform(-0.2, 0.2, size=n_bg)])
    chunks.append(bg)
    owners.append(np.full(n_bg, BACKGROUND, dtype=np.int64))
    scene = Scene(gt=list(gt), points=np.concatenate(chunks).reshape(-1, 3),
                  point_instance=np.concatenate(owners), cameras=list(cfg.cameras),
                  masks=[[] for _ in cfg.cameras], config=cfg)
    if render:
        scene.masks = render_masks(scene)
    return scene


def generate_scene(cfg: SceneConfig) -> Scene:
    return build_scene(cfg, place_objects(cfg))


# --------------------------------------------------------------------------
# masks

def pixel_index(uv: np.ndarray) -> np.ndarray:
    """Nearest pixel (ties toward +inf) as integer ``(col, row)``."""
    return np.floor(uv + 0.5).astype(np.int64)


def _morph(bitmap: np.ndarray, radius: int, op: str) -> np.ndarray:
    if radius == 0:
        return bitmap
    y, x = np.ogrid[-radius:radius + 1, -radius:radius + 1]
    disk = x * x + y * y <= radius * radius
    fn = ndimage.binary_dilation if op == "dilate" else ndimage.binary_erosion
    return fn(bitmap, structure=disk)


def dilate_erode(bitmap: np.ndarray, dilate: int, erode: int) -> np.ndarray:
    """Dilate then erode, computed on a padded canvas so that the image border
    does not act as background between the two steps."""
    rows = np.flatnonzero(bitmap.any(axis=1))
    cols = np.flatnonzero(bitmap.any(axis=0))
    pad = dilate + erode + 1
    r0, r1 = rows[0], rows[-1] + 1
    c0, c1 = cols[0], cols[-1] + 1
    canvas = np.zeros((r1 - r0 + 2 * pad, c1 - c0 + 2 * pad), dtype=bool)
    canvas[pad:-pad, pad:-pad] = bitmap[r0:r1, c0:c1]
    canvas = _morph(_morph(canvas, dilate, "dilate"), erode, "erode")
    out = np.zeros_like(bitmap)
    # Paste back, clipped to the image.
    H, W = bitmap.shape
    top, left = r0 - pad, c0 - pad
    rs, cs = max(top, 0), max(left, 0)
    re, ce = min(top + canvas.shape[0], H), min(left + canvas.shape[1], W)
    out[rs:re, cs:ce] = canvas[rs - top:re - top, cs - left:ce - left]
    return out


def _closing3(bitmap: np.ndarray) -> np.ndarray:
    rows = np.flatnonzero(bitmap.any(axis=1))
    cols = np.flatnonzero(bitmap.any(axis=0))
    r0, r1 = rows[0], rows[-1] + 1
    c0, c1 = cols[0], cols[-1] + 1
    canvas = np.zeros((r1 - r0 + 4, c1 - c0 + 4), dtype=bool)
    canvas[2:-2, 2:-2] = bitmap[r0:r1, c0:c1]
    closed = ndimage.binary_closing(canvas, structure=np.ones((3, 3), dtype=bool))
    out = bitmap.copy()
    H, W = bitmap.shape
    top, left = r0 - 2, c0 - 2
    rs, cs = max(top, 0), max(left, 0)
    re, ce = min(top + canvas.shape[0], H), min(left + canvas.shape[1], W)
    out[rs:re, cs:ce] |= closed[rs - top:re - top, cs - left:ce - left]
    return out


def rasterize(points: np.ndarray, cam: CameraModel) -> np.ndarray:
    """Bitmap of the pixels hit by projecting ``points``."""
    bitmap = np.zeros((cam.image_h, cam.image_w), dtype=bool)
    uv, _, valid = project_points(points, cam)
    if not valid.any():
        return bitmap
    px = pixel_index(uv[valid])
    inside = ((px[:, 0] >= 0) & (px[:, 0] < cam.image_w)
              & (px[:, 1] >= 0) & (px[:, 1] < cam.image_h))
    px = px[inside]
    bitmap[px[:, 1], px[:, 0]] = True
    return bitmap


def render_masks(scene: Scene, density_factor: int = RENDER_DENSITY_FACTOR) -> list:
    """Oracle instance masks for every camera.

    Each instance is drawn from a dense resample of its box surface (together
    with its own LiDAR points, so that every LiDAR point lands on a set bit),
    followed by a 3x3 morphological closing. Instances occlude nothing.
    """
    cfg = scene.config
    dense = []
    for g in scene.gt:
        spec = cfg.class_spec(g.class_id)
        n = int(round(surface_area(g.box.dims) * spec.surface_point_rate * density_factor))
        rng = stream(cfg.seed, OP_RENDER, g.instance_id)
        inset = Box3(g.box.center, g.box.dims * (1.0 - _FACE_INSET), g.box.yaw)
        samples = sample_box_surface(inset, n, rng)
        own = scene.points[scene.point_instance == g.instance_id]
        dense.append(np.concatenate([samples, own]))
    masks = []
    for ci, cam in enumerate(scene.cameras):
        per_cam = []
        for g, pts in zip(scene.gt, dense):
            bitmap = rasterize(pts, cam)
            if not bitmap.any():
                continue
            per_cam.append(InstanceMask(ci, g.instance_id, g.class_id, _closing3(bitmap)))
        masks.append(per_cam)
    return masks


def apply_mask_noise(masks: list, noise: MaskNoise, seed: int, cameras: Sequence[CameraModel],
                     class_ids: Sequence[int] = (0,)) -> list:
    """Degrade oracle masks: drop, dilate/erode, inject spurious rectangles,
    merge same-camera pairs. Returns new mask lists; inputs are untouched."""
    out = []
    for ci, per_cam in enumerate(masks):
        cam = cameras[ci]
        kept = []
        for mi, m in enumerate(per_cam):
            if noise.drop_prob > 0 and stream(seed, OP_NOISE_DROP, ci * 100_000 + mi).random() < noise.drop_prob:
                continue
            bitmap = m.bitmap
            if noise.dilate_px or noise.erode_px:
                bitmap = dilate_erode(bitmap, noise.dilate_px, noise.erode_px)
                if not bitmap.any():
                    continue
            kept.append(InstanceMask(m.camera_index, m.instance_id, m.class_id, bitmap.copy()))
        rng = stream(seed, OP_NOISE_SPURIOUS, ci)
        if noise.spurious_prob > 0 and rng.random() < noise.spurious_prob:
            w, h = rng.integers(8, 65, size=2)
            w, h = min(w, cam.image_w), min(h, cam.image_h)
            x0 = int(rng.integers(0, cam.image_w - w + 1))
            y0 = int(rng.integers(0, cam.image_h - h + 1))
            bitmap = np.zeros((cam.image_h, cam.image_w), dtype=bool)
            bitmap[y0:y0 + h, x0:x0 + w] = True
            kept.append(InstanceMask(ci, None, int(rng.choice(list(class_ids))), bitmap))
        rng = stream(seed, OP_NOISE_MERGE, ci)
        if noise.merge_prob > 0 and len(kept) >= 2 and rng.random() < noise.merge_prob:
            i, j = sorted(rng.choice(len(kept), size=2, replace=False))
            a, b = kept[i], kept[j]
            kept[i] = InstanceMask(ci, a.instance_id, a.class_id, a.bitmap | b.bitmap)
            del kept[j]
        out.append(kept)
    return out


def with_masks(scene: Scene, masks: list) -> Scene:
    return replace(scene, masks=masks)


def gt_membership(scene: Scene) -> np.ndarray:
    """Index of the containing GT box per point (nearest center on overlap),
    ``BACKGROUND`` when outside every box."""
    n = len(scene.points)
    owner = np.full(n, BACKGROUND, dtype=np.int64)
    best = np.full(n, np.inf)
    for gi, g in enumerate(scene.gt):
        inside = points_in_box3(scene.points, g.box)
        dist = np.linalg.norm(scene.points - g.box.center, axis=1)
        better = inside & (dist < best)
        owner[better] = gi
        best[better] = dist[better]
    return owner
