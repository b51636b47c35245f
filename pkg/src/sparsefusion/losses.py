"""Box target encoding and the detection loss stack."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .geometry import DIM_FLOOR, Box3

PROB_EPS = 1e-7


@dataclass(frozen=True)
class RegressionTarget:
    dx: float
    dy: float
    dz: float
    log_w: float
    log_l: float
    log_h: float
    sin_ry: float
    cos_ry: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    @classmethod
    def from_array(cls, a) -> "RegressionTarget":
        return cls(*(float(v) for v in np.asarray(a, dtype=float).reshape(8)))


def encode_target(gt: Box3, anchor_pos) -> RegressionTarget:
    """Offset from the anchor, log dimensions and the yaw as (sin, cos)."""
    d = gt.center - np.asarray(anchor_pos, dtype=float)
    w, l, h = np.log(gt.dims)
    return RegressionTarget(d[0], d[1], d[2], w, l, h, math.sin(gt.yaw), math.cos(gt.yaw))


def decode_target(t: RegressionTarget, anchor_pos) -> Box3:
    a = t.as_array()
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite regression target {t}")
    center = np.asarray(anchor_pos, dtype=float) + a[:3]
    dims = np.maximum(np.exp(a[3:6]), DIM_FLOOR)
    return Box3(center, dims, math.atan2(t.sin_ry, t.cos_ry))


def l1_loss(pred: RegressionTarget, tgt: RegressionTarget) -> float:
    return float(np.mean(np.abs(pred.as_array() - tgt.as_array())))


def focal_loss(pred_probs, labels, alpha: float = 0.25, gamma: float = 2.0) -> float:
    """Binary focal loss averaged over samples.

    ``-alpha_t * (1 - p_t)**gamma * log(p_t)`` with ``p_t = p`` and
    ``alpha_t = alpha`` for positives, ``p_t = 1 - p`` and
    ``alpha_t = 1 - alpha`` for negatives. Probabilities are clamped to
    ``[1e-7, 1 - 1e-7]``.
    """
    p = np.clip(np.asarray(pred_probs, dtype=float), PROB_EPS, 1.0 - PROB_EPS)
    y = np.asarray(labels).astype(bool)
    if p.size == 0:
        return 0.0
    p_t = np.where(y, p, 1.0 - p)
    alpha_t = np.where(y, alpha, 1.0 - alpha)
    return float(np.mean(-alpha_t * (1.0 - p_t) ** gamma * np.log(p_t)))


@dataclass
class LossBreakdown:
    seg: float = 0.0
    vote: float = 0.0
    cls_li: float = 0.0
    reg_li: float = 0.0
    cls_cam: float = 0.0
    reg_cam: float = 0.0
    cls_ref: float = 0.0
    reg_ref: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"loss term {f.name} must be finite and non-negative, got {v}")

    def parts(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def total(self) -> float:
        return total_loss(self)


def total_loss(parts: LossBreakdown) -> float:
    """Unweighted sum of the eight terms."""
    return float(sum(parts.parts().values()))
