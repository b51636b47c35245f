"""Query refinement: instance features, reference boxes, re-cropping and
final detections. Both modalities go through the same routines; modality
only selects the score bonus and the dominant-instance rule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .geometry import (Box3, CameraModel, fit_box_pca, iou2d, points_in_box3,
                       project_points)
from .geometry import Box2
from .lidar import ccl_labels
from .query import CAMERA, LIDAR, Query
from .scene import DEFAULT_CLASSES

FEATURE_DIM = 32
MAX_CLASSES = 16

# (FeatureVector, member points) -> Box3
BoxPredictor = Callable[[np.ndarray, np.ndarray], Box3]


@dataclass(frozen=True)
class RefineParams:
    fg_threshold: float = 0.5
    # Foreground points closer than this chain into one candidate instance.
    component_radius_m: float = 2.0
    provenance_bonus: dict = field(default_factory=lambda: {CAMERA: 1.0, LIDAR: 0.9})
    classes: tuple = DEFAULT_CLASSES


@dataclass
class Detection:
    box: Box3
    class_id: int
    score: float
    provenance: str
    source_mask: Optional[tuple] = None

    def __post_init__(self):
        if not (np.isfinite(self.score) and 0.0 <= self.score <= 1.0):
            raise ValueError(f"detection score must lie in [0, 1], got {self.score}")


def extract_features(q: Query, points: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Fixed-length instance statistics.

    Layout: ``[log1p(count), centroid(3), pca extents(3), xy-cov eigenvalues
    (2, descending), z-range, mean score, max score, class one-hot(16),
    zeros(4)]``.
    """
    pts = np.asarray(points, dtype=float)[q.point_indices]
    sc = np.asarray(scores, dtype=float)[q.point_indices]
    feat = np.zeros(FEATURE_DIM)
    feat[0] = np.log1p(len(pts))
    feat[1:4] = pts.mean(axis=0)
    feat[4:7] = fit_box_pca(pts).dims
    xy = pts[:, :2] - pts[:, :2].mean(axis=0)
    evals = np.linalg.eigvalsh(xy.T @ xy / len(pts))
    feat[7:9] = np.clip(evals[::-1], 0.0, None)
    feat[9] = pts[:, 2].max() - pts[:, 2].min()
    feat[10] = sc.mean()
    feat[11] = sc.max()
    if q.class_hint is not None and 0 <= q.class_hint < MAX_CLASSES:
        feat[12 + q.class_hint] = 1.0
    return feat


def _clipped_hull(pts: np.ndarray, cam: CameraModel) -> Optional[Box2]:
    uv, _, valid = project_points(pts, cam)
    if not valid.any():
        return None
    uv = uv[valid]
    lo_x, hi_x = -0.5, cam.image_w - 0.5
    lo_y, hi_y = -0.5, cam.image_h - 0.5
    x0, x1 = np.clip([uv[:, 0].min(), uv[:, 0].max()], lo_x, hi_x)
    y0, y1 = np.clip([uv[:, 1].min(), uv[:, 1].max()], lo_y, hi_y)
    return Box2(float(x0), float(y0), float(x1), float(y1))


class InstanceIndex:
    """Connected components of a scene's foreground points.

    Components group the raw (not voted) foreground points at
    ``component_radius_m``; they are the candidate instances a query's
    foreground members may belong to.
    """

    def __init__(self, points: np.ndarray, scores: np.ndarray, params: RefineParams = RefineParams()):
        self.fg = np.flatnonzero(np.asarray(scores) >= params.fg_threshold)
        self.label = np.full(len(points), -1, dtype=np.int64)
        if len(self.fg):
            self.label[self.fg] = ccl_labels(np.asarray(points)[self.fg], params.component_radius_m)
        self.n = int(self.label.max()) + 1
        order = np.argsort(self.label[self.fg], kind="stable")
        bounds = np.searchsorted(self.label[self.fg][order], np.arange(self.n + 1))
        self._members = [self.fg[order[bounds[k]:bounds[k + 1]]] for k in range(self.n)]

    def members(self, label: int) -> np.ndarray:
        return self._members[label]


def instance_points(q: Query, points: np.ndarray, scores: np.ndarray,
                    cameras: Sequence[CameraModel] = None,
                    params: RefineParams = RefineParams(),
                    index: InstanceIndex = None) -> np.ndarray:
    """Point indices of the dominant instance behind a query.

    The query's foreground members (score >= threshold) vote for the scene
    foreground components they belong to. A camera query keeps the component
    whose projected hull, clipped to the image, best overlaps its source box;
    a LiDAR query keeps the component holding most of its members. Ties go to
    more members, then the lower label. The whole component is returned, so
    an instance cut by the frustum or the image border is recovered. A query
    without foreground members returns its own members.
    """
    points = np.asarray(points, dtype=float)
    if index is None:
        index = InstanceIndex(points, scores, params)
    labels = index.label[q.point_indices]
    labels = labels[labels >= 0]
    if len(labels) == 0:
        return q.point_indices
    cand, counts = np.unique(labels, return_counts=True)
    if len(cand) == 1:
        return index.members(int(cand[0]))
    if q.modality == CAMERA and cameras is not None:
        cam = cameras[q.camera_index]
        ious = []
        for lab in cand:
            hull = _clipped_hull(points[index.members(int(lab))], cam)
            ious.append(0.0 if hull is None else iou2d(hull, q.box2))
        best = max(range(len(cand)), key=lambda k: (ious[k], counts[k], -cand[k]))
    else:
        best = max(range(len(cand)), key=lambda k: (counts[k], -cand[k]))
    return index.members(int(cand[best]))


def predict_reference_box(q: Query, points: np.ndarray, scores: np.ndarray = None,
                          cameras: Sequence[CameraModel] = None,
                          params: RefineParams = RefineParams(),
                          predictor: BoxPredictor = None,
                          index: InstanceIndex = None) -> Box3:
    """Reference box of a query.

    The default predictor fits :func:`fit_box_pca` to the query's dominant
    instance. ``predictor`` substitutes any ``(features, member points) ->
    Box3`` callable.
    """
    points = np.asarray(points, dtype=float)
    if scores is None:
        scores = np.ones(len(points))
    if predictor is not None:
        return predictor(extract_features(q, points, scores), points[q.point_indices])
    return fit_box_pca(points[instance_points(q, points, scores, cameras, params, index)])


def align_query(q: Query, ref: Box3, points: np.ndarray) -> Query:
    """Re-crop a query to the scene points inside its reference box; the query
    is returned unchanged when the crop is empty."""
    points = np.asarray(points, dtype=float)
    idx = np.flatnonzero(points_in_box3(points, ref))
    if len(idx) == 0:
        return q
    return q.with_points(idx, points[idx].mean(axis=0))


def nearest_class(box: Box3, classes=DEFAULT_CLASSES) -> int:
    """Class whose size prior is nearest in (footprint major, footprint minor, h)."""
    def key(dims):
        return np.array([max(dims[0], dims[1]), min(dims[0], dims[1]), dims[2]])

    fitted = key(box.dims)
    dists = [np.linalg.norm(fitted - key(c.size_prior)) for c in classes]
    return classes[int(np.argmin(dists))].class_id


def predict_final(aligned: Query, points: np.ndarray, scores: np.ndarray,
                  cameras: Sequence[CameraModel] = None,
                  params: RefineParams = RefineParams(),
                  predictor: BoxPredictor = None,
                  index: InstanceIndex = None) -> Detection:
    """Final box, class and score of an aligned query.

    The box is refit on the aligned query. The class is the mask class when
    present, else the nearest size prior. The score is the mean member
    foreground score times the provenance bonus.
    """
    points = np.asarray(points, dtype=float)
    scores = np.asarray(scores, dtype=float)
    box = predict_reference_box(aligned, points, scores, cameras, params, predictor, index)
    cls = aligned.class_hint if aligned.class_hint is not None else nearest_class(box, params.classes)
    score = float(scores[aligned.point_indices].mean()) * params.provenance_bonus[aligned.modality]
    return Detection(box, int(cls), float(np.clip(score, 0.0, 1.0)), aligned.modality,
                     aligned.source_mask)


def refine_query(q: Query, points: np.ndarray, scores: np.ndarray,
                 cameras: Sequence[CameraModel] = None,
                 params: RefineParams = RefineParams(),
                 index: InstanceIndex = None):
    """Reference box, aligned query and final detection for one query."""
    if index is None:
        index = InstanceIndex(points, scores, params)
    ref = predict_reference_box(q, points, scores, cameras, params, index=index)
    aligned = align_query(q, ref, points)
    return ref, aligned, predict_final(aligned, points, scores, cameras, params, index=index)


def _suppresses(kept: Detection, cand: Detection, dist_m: float) -> bool:
    if kept.class_id != cand.class_id:
        return False
    # Distinct masks of one camera are separate instances by construction of
    # the 2D segmentation; they never suppress each other.
    if (kept.source_mask is not None and cand.source_mask is not None
            and kept.source_mask[0] == cand.source_mask[0]
            and kept.source_mask != cand.source_mask):
        return False
    return float(np.hypot(*(kept.box.center[:2] - cand.box.center[:2]))) < dist_m


def dedup(detections: Sequence[Detection], bev_center_dist_m: float = 1.0) -> list:
    """Greedy duplicate suppression by descending score (stable on ties)."""
    if not bev_center_dist_m > 0:
        raise ValueError("bev_center_dist_m must be positive")
    order = sorted(range(len(detections)), key=lambda i: -detections[i].score)
    kept: list[Detection] = []
    for i in order:
        d = detections[i]
        if not any(_suppresses(k, d, bev_center_dist_m) for k in kept):
            kept.append(d)
    return kept
