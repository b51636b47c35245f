"""Fully sparse LiDAR-camera fusion on synthetic scenes.

Bi-modal instance queries (LiDAR clusters and camera frustums), reference-box
alignment, two-round label assignment, the head loss stack, center-distance
evaluation and a dense-vs-sparse cost benchmark.
"""

from .assignment import NEGATIVE, Assignment, assign_2d, assign_3d, query_in_box, two_round
from .camera import FrustumParams, lift_mask, make_camera_queries
from .config import ConfigError, PipelineConfig
from .evaluation import EvalResult, evaluate
from .geometry import (Box2, Box3, CameraModel, box3_corners, camera_ring, fit_box_pca, iou2d,
                       look_camera, point_in_box3, project, project_box3, unproject)
from .lidar import ccl_cluster, make_lidar_queries, oracle_score, oracle_vote, voxelize
from .losses import LossBreakdown, RegressionTarget, decode_target, encode_target, focal_loss, l1_loss, total_loss
from .pipeline import PipelineRun, run_pipeline
from .query import CAMERA, LIDAR, Query
from .refine import Detection, align_query, dedup, extract_features, predict_final, predict_reference_box
from .scene import (ClassSpec, InstanceMask, MaskNoise, Scene, SceneConfig, apply_mask_noise,
                    generate_scene, render_masks)

__version__ = "0.1.0"
