"""Where each modality fails alone and the fused pipeline recovers.

Crowding: two pedestrians 0.3 m apart vote into one LiDAR cluster, but the
camera sees two instance masks, so two camera queries survive.

Sparsity: a cyclist at 100 m returns at most three LiDAR points, too few for
a LiDAR cluster, while its camera mask still lifts a query.
"""
import math

import numpy as np

from sparsefusion import PipelineConfig, SceneConfig, run_pipeline
from sparsefusion.evaluation import recall
from sparsefusion.geometry import Box3
from sparsefusion.lidar import ccl_cluster, oracle_score, oracle_vote
from sparsefusion.scene import DEFAULT_CLASSES, GroundTruth, build_scene


def object_at(spec, xy, rng, instance_id):
    dims = np.array(spec.size_prior) * (1 + spec.size_jitter * rng.uniform(-1, 1, 3))
    box = Box3(np.array([xy[0], xy[1], dims[2] / 2]), dims, rng.uniform(-math.pi, math.pi))
    return GroundTruth(box, spec.class_id, instance_id)


print("crowding: two pedestrians 0.3 m apart at 20 m")
rng = np.random.default_rng(3)
ped = DEFAULT_CLASSES[2]
pair = [object_at(ped, (20.0, y), rng, k) for k, y in enumerate((-0.15, 0.15))]
scene = build_scene(SceneConfig(seed=3, n_objects=2, min_center_gap=0.0), pair)

votes = oracle_vote(scene, scene.points, oracle_score(scene))
clusters = ccl_cluster(votes, 0.5, 2, scene.points)
print(f"  LiDAR clusters: {len(clusters)}")
for name, cfg in [("LiDAR only", PipelineConfig(use_camera=False)), ("fused", PipelineConfig())]:
    run = run_pipeline(scene, cfg)
    print(f"  {name:>10}: {len(run.detections)} detections, recall@1m "
          f"{recall([run.detections], [scene.gt], 1.0):.2f}")

print("\nsparsity: one cyclist at 100 m")
rng = np.random.default_rng(4)
cyc = [object_at(DEFAULT_CLASSES[3], (0.0, 100.0), rng, 0)]
scene = build_scene(SceneConfig(range_m=110.0, seed=4, n_objects=1), cyc)
print(f"  LiDAR points on the object: {int(np.sum(scene.point_instance == 0))}")
for name, cfg in [("LiDAR only", PipelineConfig(min_cluster_points=4, use_camera=False)),
                  ("fused", PipelineConfig(min_cluster_points=4))]:
    run = run_pipeline(scene, cfg)
    print(f"  {name:>10}: recall@2m {recall([run.detections], [scene.gt], 2.0):.2f}")
