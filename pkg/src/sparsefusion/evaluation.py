"""Center-distance average precision over a set of scenes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .query import CAMERA, LIDAR

DEFAULT_THRESHOLDS = (0.5, 1.0, 2.0, 4.0)
RECALL_SAMPLES = np.linspace(0.01, 1.0, 100)


@dataclass
class EvalResult:
    thresholds: tuple
    classes: tuple
    ap: dict                     # (class_id, threshold) -> AP
    curves: dict                 # (class_id, threshold) -> (precision, recall)
    recall_by_path: dict         # threshold -> {provenance: recall}
    n_gt: int = 0
    map_by_threshold: dict = field(default_factory=dict)

    def __post_init__(self):
        for t in self.thresholds:
            vals = [self.ap[(c, t)] for c in self.classes]
            self.map_by_threshold[t] = float(np.mean(vals)) if vals else 1.0

    @property
    def mean_ap(self) -> float:
        return float(np.mean(list(self.map_by_threshold.values())))

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "classes": list(self.classes),
            "n_gt": self.n_gt,
            "mean_ap": self.mean_ap,
            "map_by_threshold": {repr(t): v for t, v in self.map_by_threshold.items()},
            "ap": {f"{c}@{t!r}": v for (c, t), v in sorted(self.ap.items())},
            "recall_by_path": {repr(t): dict(v) for t, v in self.recall_by_path.items()},
        }


def interpolated_ap(precision: np.ndarray, recall: np.ndarray) -> float:
    """Mean over recall samples 0.01..1.00 of the max precision at recall >= r
    (zero where that recall is never reached)."""
    if len(recall) == 0:
        return 0.0
    # Suffix maximum of precision, indexed by operating point.
    best = np.maximum.accumulate(precision[::-1])[::-1]
    pos = np.searchsorted(recall, RECALL_SAMPLES - 1e-12, side="left")
    vals = np.where(pos < len(recall), best[np.minimum(pos, len(recall) - 1)], 0.0)
    return float(vals.mean())


def _bev(box) -> np.ndarray:
    return box.center[:2]


def evaluate(detections: Sequence[Sequence], gts: Sequence[Sequence],
             dist_thresholds_m: Sequence[float] = DEFAULT_THRESHOLDS,
             classes: Sequence[int] = None) -> EvalResult:
    """Evaluate per-scene detection lists against per-scene GT lists.

    Detections of each class are ranked by descending score across all
    scenes (ties: lower class id, then earlier scene and index) and greedily
    matched to the nearest unmatched same-class GT of their scene whose BEV
    center lies within the threshold.
    """
    thresholds = tuple(float(t) for t in dist_thresholds_m)
    if list(thresholds) != sorted(thresholds):
        raise ValueError("distance thresholds must be ascending")
    if len(detections) != len(gts):
        raise ValueError("need one detection list per GT list")
    if classes is None:
        found = {g.class_id for scene in gts for g in scene}
        found |= {d.class_id for scene in detections for d in scene}
        classes = sorted(found)
    classes = tuple(int(c) for c in classes)
    n_gt_total = sum(len(s) for s in gts)

    ap, curves = {}, {}
    matched_by_path = {t: {LIDAR: 0, CAMERA: 0} for t in thresholds}
    for c in classes:
        gt_xy = [np.array([_bev(g.box) for g in s if g.class_id == c]).reshape(-1, 2) for s in gts]
        n_gt = sum(len(x) for x in gt_xy)
        ranked = [(-d.score, d.class_id, si, di, d)
                  for si, s in enumerate(detections) for di, d in enumerate(s) if d.class_id == c]
        ranked.sort(key=lambda r: r[:4])
        for t in thresholds:
            used = [np.zeros(len(x), dtype=bool) for x in gt_xy]
            tp = np.zeros(len(ranked), dtype=bool)
            for k, (_, _, si, _, d) in enumerate(ranked):
                if len(gt_xy[si]) == 0:
                    continue
                dist = np.hypot(*(gt_xy[si] - _bev(d.box)).T)
                dist[used[si]] = np.inf
                j = int(np.argmin(dist))
                if dist[j] <= t:
                    used[si][j] = True
                    tp[k] = True
                    matched_by_path[t][d.provenance] = matched_by_path[t].get(d.provenance, 0) + 1
            if n_gt == 0:
                ap[(c, t)] = 1.0 if not ranked else 0.0
                curves[(c, t)] = (np.zeros(0), np.zeros(0))
                continue
            ctp = np.cumsum(tp)
            precision = ctp / np.arange(1, len(tp) + 1)
            recall = ctp / n_gt
            curves[(c, t)] = (precision, recall)
            ap[(c, t)] = interpolated_ap(precision, recall)
    recall_by_path = {t: {p: (n / n_gt_total if n_gt_total else 0.0) for p, n in v.items()}
                      for t, v in matched_by_path.items()}
    return EvalResult(thresholds, classes, ap, curves, recall_by_path, n_gt_total)


def recall(detections: Sequence[Sequence], gts: Sequence[Sequence], threshold: float) -> float:
    """Fraction of GT objects matched at ``threshold`` (all classes)."""
    res = evaluate(detections, gts, (threshold,))
    return float(sum(res.recall_by_path[float(threshold)].values()))
