"""Two-round label assignment: query-in-box in 3D, then max-IoU in the image
for camera queries the 3D round left unassigned."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import CameraModel, iou2d, points_in_box3, project_box3
from .query import CAMERA, Query

NEGATIVE = -1
R3D = "R3D"
R2D = "R2D"
NONE = "NONE"


@dataclass
class Assignment:
    """Per-query GT index (``NEGATIVE`` when unassigned) and deciding round."""

    gt_index: np.ndarray
    round: list
    iou: Optional[np.ndarray] = None

    def __post_init__(self):
        self.gt_index = np.asarray(self.gt_index, dtype=np.int64)
        if self.iou is None:
            self.iou = np.zeros(len(self.gt_index))

    @classmethod
    def empty(cls, n: int) -> "Assignment":
        return cls(np.full(n, NEGATIVE, dtype=np.int64), [NONE] * n)

    def positives(self, rnd: str = None) -> set:
        return {i for i, g in enumerate(self.gt_index)
                if g != NEGATIVE and (rnd is None or self.round[i] == rnd)}

    def __len__(self):
        return len(self.gt_index)


def _positions(queries: Sequence[Query], positions) -> np.ndarray:
    if positions is None:
        return np.array([q.position for q in queries]).reshape(-1, 3)
    return np.asarray(positions, dtype=float).reshape(-1, 3)


def assign_3d(queries: Sequence[Query], gts: Sequence, positions=None) -> Assignment:
    """Query-in-box over both modalities.

    ``positions`` overrides the query positions (reference-box centers at the
    refinement stage). A position inside several boxes goes to the nearest
    GT center; exact ties go to the lower GT index.
    """
    pos = _positions(queries, positions)
    out = Assignment.empty(len(pos))
    best = np.full(len(pos), np.inf)
    for gi, g in enumerate(gts):
        inside = points_in_box3(pos, g.box)
        dist = np.linalg.norm(pos - g.box.center, axis=1)
        better = inside & (dist < best)
        out.gt_index[better] = gi
        best[better] = dist[better]
    for i in np.flatnonzero(out.gt_index != NEGATIVE):
        out.round[i] = R3D
    return out


def assign_2d(queries: Sequence[Query], gts: Sequence, cameras: Sequence[CameraModel],
              iou_threshold: float = 0.5, candidates=None) -> Assignment:
    """Max-IoU between each camera query's source box and the GT boxes
    projected into the same camera. Several queries may take one GT."""
    out = Assignment.empty(len(queries))
    todo = range(len(queries)) if candidates is None else candidates
    projected: dict = {}
    for i in todo:
        q = queries[i]
        if q.modality != CAMERA:
            continue
        ci = q.camera_index
        if ci not in projected:
            projected[ci] = [project_box3(g.box, cameras[ci]) for g in gts]
        ious = np.array([0.0 if b is None else iou2d(b, q.box2) for b in projected[ci]])
        if len(ious) == 0:
            continue
        j = int(np.argmax(ious))
        out.iou[i] = ious[j]
        if ious[j] >= iou_threshold:
            out.gt_index[i] = j
            out.round[i] = R2D
    return out


def two_round(queries: Sequence[Query], gts: Sequence, cameras: Sequence[CameraModel],
              iou_threshold: float = 0.5, positions=None) -> Assignment:
    """3D round on every query, then the 2D round on the unassigned camera
    queries. Everything left over is negative."""
    out = assign_3d(queries, gts, positions)
    rest = [i for i in range(len(queries))
            if out.gt_index[i] == NEGATIVE and queries[i].modality == CAMERA]
    second = assign_2d(queries, gts, cameras, iou_threshold, candidates=rest)
    for i in rest:
        out.iou[i] = second.iou[i]
        if second.gt_index[i] != NEGATIVE:
            out.gt_index[i] = second.gt_index[i]
            out.round[i] = R2D
    return out


def query_in_box(queries: Sequence[Query], gts: Sequence, positions=None) -> Assignment:
    """Single-round baseline: query-in-box for all queries."""
    return assign_3d(queries, gts, positions)
