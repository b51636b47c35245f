"""Camera-side query generation: lift 2D instance masks to frustum point
clusters with score-weighted centers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import CameraModel, project_points
from .query import CAMERA, Query
from .scene import InstanceMask, pixel_index


@dataclass(frozen=True)
class FrustumParams:
    depth_min_m: float = 0.5
    depth_max_m: float = 64.8
    score_floor: float = 1e-3

    def __post_init__(self):
        if not 0 < self.depth_min_m < self.depth_max_m:
            raise ValueError("frustum needs 0 < depth_min_m < depth_max_m")
        if not self.score_floor > 0:
            raise ValueError("score_floor must be positive")

    @classmethod
    def for_range(cls, range_m: float, **kw) -> "FrustumParams":
        return cls(depth_max_m=1.2 * range_m, **kw)


class PixelLookup:
    """Nearest-pixel coordinates of a point cloud in one camera, computed once
    and shared by every mask of that camera."""

    def __init__(self, points: np.ndarray, cam: CameraModel, params: FrustumParams):
        uv, depth, valid = project_points(points, cam)
        ok = valid & (depth >= params.depth_min_m) & (depth <= params.depth_max_m)
        px = np.zeros((len(depth), 2), dtype=np.int64)
        px[ok] = pixel_index(uv[ok])
        ok &= ((px[:, 0] >= 0) & (px[:, 0] < cam.image_w)
               & (px[:, 1] >= 0) & (px[:, 1] < cam.image_h))
        self.index = np.flatnonzero(ok)
        self.col = px[ok, 0]
        self.row = px[ok, 1]

    def select(self, bitmap: np.ndarray) -> np.ndarray:
        return self.index[bitmap[self.row, self.col]]


def lift_mask(mask: InstanceMask, cam: CameraModel, points: np.ndarray,
              params: FrustumParams = FrustumParams(), lookup: PixelLookup = None) -> Optional[np.ndarray]:
    """Indices of points whose nearest pixel is a set bit of ``mask`` and whose
    depth lies within the frustum bounds; ``None`` if there are none."""
    if lookup is None:
        lookup = PixelLookup(points, cam, params)
    idx = lookup.select(mask.bitmap)
    return idx if len(idx) else None


def weighted_center(points: np.ndarray, scores: np.ndarray, score_floor: float) -> np.ndarray:
    w = np.maximum(score_floor, np.asarray(scores, dtype=float))
    return (w[:, None] * points).sum(axis=0) / w.sum()


def make_camera_queries(masks: Sequence[Sequence[InstanceMask]], cameras: Sequence[CameraModel],
                        points: np.ndarray, scores: np.ndarray,
                        params: FrustumParams = FrustumParams()) -> list:
    """One query per non-empty lifted mask, in (camera, mask) order.

    A point inside several frustums is copied into each of the corresponding
    queries. The position is the foreground-score weighted mean of the member
    points, with weights floored at ``params.score_floor``.
    """
    points = np.asarray(points, dtype=float)
    scores = np.asarray(scores, dtype=float)
    queries = []
    for ci, per_cam in enumerate(masks):
        if not per_cam:
            continue
        lookup = PixelLookup(points, cameras[ci], params)
        for mi, mask in enumerate(per_cam):
            idx = lookup.select(mask.bitmap)
            if len(idx) == 0:
                continue
            pos = weighted_center(points[idx], scores[idx], params.score_floor)
            queries.append(Query(idx, CAMERA, pos, source_box2=(ci, mask.bbox2),
                                 class_hint=mask.class_id, source_mask=(ci, mi)))
    return queries
