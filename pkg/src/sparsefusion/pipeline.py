"""End-to-end sparse fusion pipeline on one scene."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .camera import FrustumParams, make_camera_queries
from .config import PipelineConfig
from .lidar import Votes, ccl_cluster, make_lidar_queries, oracle_score, oracle_vote, voxelize
from .query import CAMERA, LIDAR
from .refine import InstanceIndex, RefineParams, dedup, refine_query
from .scene import Scene


@dataclass
class PipelineRun:
    scores: np.ndarray
    votes: Votes
    n_voxels: int
    queries: list
    references: list
    aligned: list
    raw_detections: list
    detections: list
    timings_ms: dict = field(default_factory=dict)

    @property
    def lidar_queries(self):
        return [q for q in self.queries if q.modality == LIDAR]

    @property
    def camera_queries(self):
        return [q for q in self.queries if q.modality == CAMERA]

    def counts(self) -> dict:
        return {
            "points": int(len(self.scores)),
            "voxels": int(self.n_voxels),
            "votes": int(len(self.votes)),
            "lidar_queries": len(self.lidar_queries),
            "camera_queries": len(self.camera_queries),
            "query_points": int(sum(len(q) for q in self.queries)),
            "raw_detections": len(self.raw_detections),
            "detections": len(self.detections),
        }

    def sparse_live(self) -> int:
        """Live elements: points + votes + total query sizes."""
        return int(len(self.scores) + len(self.votes) + sum(len(q) for q in self.queries))


def frustum_params(cfg: PipelineConfig, scene: Scene) -> FrustumParams:
    depth_max = cfg.depth_max_m
    if depth_max is None:
        depth_max = 1.2 * scene.config.range_m
    return FrustumParams(cfg.depth_min_m, depth_max, cfg.score_floor)


def refine_params(cfg: PipelineConfig, scene: Scene) -> RefineParams:
    return RefineParams(fg_threshold=cfg.fg_threshold,
                        component_radius_m=cfg.component_radius_m,
                        provenance_bonus={CAMERA: cfg.bonus_camera, LIDAR: cfg.bonus_lidar},
                        classes=scene.config.classes)


def generate_queries(scene: Scene, cfg: PipelineConfig, scores: np.ndarray = None):
    """Scores, votes, voxel count and the bi-modal query list of a scene."""
    if scores is None:
        scores = oracle_score(scene, cfg.flip_prob, cfg.seed)
    n_voxels = len(voxelize(scene.points, cfg.voxel_size))
    votes = oracle_vote(scene, scene.points, scores, cfg.fg_threshold, cfg.vote_sigma_m, cfg.seed)
    queries = []
    if cfg.use_lidar:
        clusters = ccl_cluster(votes, cfg.connect_radius_m, cfg.min_cluster_points, scene.points)
        queries += make_lidar_queries(clusters, scene.points)
    if cfg.use_camera:
        queries += make_camera_queries(scene.masks, scene.cameras, scene.points, scores,
                                       frustum_params(cfg, scene))
    return scores, votes, n_voxels, queries


def run_pipeline(scene: Scene, cfg: PipelineConfig = PipelineConfig()) -> PipelineRun:
    t0 = time.perf_counter()
    scores, votes, n_voxels, queries = generate_queries(scene, cfg)
    t1 = time.perf_counter()
    params = refine_params(cfg, scene)
    index = InstanceIndex(scene.points, scores, params)
    refs, aligned, raw = [], [], []
    for q in queries:
        ref, al, det = refine_query(q, scene.points, scores, scene.cameras, params, index)
        refs.append(ref)
        aligned.append(al)
        raw.append(det)
    t2 = time.perf_counter()
    dets = dedup(raw, cfg.dedup_dist_m)
    t3 = time.perf_counter()
    return PipelineRun(scores, votes, n_voxels, queries, refs, aligned, raw, dets,
                       {"queries": 1e3 * (t1 - t0), "refine": 1e3 * (t2 - t1),
                        "dedup": 1e3 * (t3 - t2), "total": 1e3 * (t3 - t0)})
