"""Training-side quantities for a pipeline run: stage-wise assignments, the
eight loss terms, and an oracle head that shows what a perfectly fitted head
can recover under a given assignment."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .assignment import NEGATIVE, Assignment, two_round
from .config import PipelineConfig
from .losses import LossBreakdown, decode_target, encode_target, focal_loss, l1_loss
from .pipeline import PipelineRun
from .query import CAMERA, LIDAR, Query
from .refine import Detection, dedup
from .scene import Scene, gt_membership


def stage_assignments(scene: Scene, run: PipelineRun, cfg: PipelineConfig):
    """Two-round assignment at generation (query positions) and refinement
    (reference-box centers) stages."""
    gen = two_round(run.queries, scene.gt, scene.cameras, cfg.iou2d_threshold)
    ref_centers = [r.center for r in run.references]
    ref = two_round(run.queries, scene.gt, scene.cameras, cfg.iou2d_threshold,
                    positions=ref_centers)
    return gen, ref


def _head_losses(indices, labels_gt, probs, pred_boxes, anchors, gts):
    if not indices:
        return 0.0, 0.0
    y = [labels_gt[i] != NEGATIVE for i in indices]
    cls = focal_loss([probs[i] for i in indices], y)
    reg = [l1_loss(encode_target(pred_boxes[i], anchors[i]),
                   encode_target(gts[labels_gt[i]].box, anchors[i]))
           for i in indices if labels_gt[i] != NEGATIVE]
    return cls, (float(np.mean(reg)) if reg else 0.0)


def loss_breakdown(scene: Scene, run: PipelineRun, cfg: PipelineConfig) -> LossBreakdown:
    owner = gt_membership(scene)
    seg = focal_loss(run.scores, owner >= 0)
    vote = 0.0
    vote_owner = owner[run.votes.point_index]
    fg = vote_owner >= 0
    if fg.any():
        centers = np.array([g.box.center for g in scene.gt])[vote_owner[fg]]
        vote = float(np.mean(np.abs(run.votes.centers[fg] - centers)))

    gen, ref = stage_assignments(scene, run, cfg)
    member_prob = [float(np.mean(run.scores[q.point_indices])) for q in run.queries]
    positions = [q.position for q in run.queries]
    li = [i for i, q in enumerate(run.queries) if q.modality == LIDAR]
    cam = [i for i, q in enumerate(run.queries) if q.modality == CAMERA]
    cls_li, reg_li = _head_losses(li, gen.gt_index, member_prob, run.references, positions, scene.gt)
    cls_cam, reg_cam = _head_losses(cam, gen.gt_index, member_prob, run.references, positions, scene.gt)
    det_prob = [d.score for d in run.raw_detections]
    det_boxes = [d.box for d in run.raw_detections]
    ref_centers = [r.center for r in run.references]
    cls_ref, reg_ref = _head_losses(list(range(len(run.queries))), ref.gt_index, det_prob,
                                    det_boxes, ref_centers, scene.gt)
    return LossBreakdown(seg, vote, cls_li, reg_li, cls_cam, reg_cam, cls_ref, reg_ref)


def oracle_head(queries: Sequence[Query], assignment: Assignment, gts: Sequence,
                positions=None, dedup_dist_m: float = 1.0) -> list:
    """Detections of a head that reproduces its training targets exactly.

    Positive queries regress their assigned GT relative to their anchor and
    score 1; negative queries are classified as background and emit nothing.
    """
    anchors = [q.position for q in queries] if positions is None else list(positions)
    dets = []
    for i, q in enumerate(queries):
        g = assignment.gt_index[i]
        if g == NEGATIVE:
            continue
        box = decode_target(encode_target(gts[g].box, anchors[i]), anchors[i])
        dets.append(Detection(box, gts[g].class_id, 1.0, q.modality, q.source_mask))
    return dedup(dets, dedup_dist_m)
