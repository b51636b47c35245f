"""Why camera queries need a second, image-space assignment round.

A camera query's 3D position is a frustum centroid; background points in the
frustum can pull it far off in depth. Here every camera query is pushed past
the back of its object along the viewing ray. Query-in-box labels all of them
negative; the 2D max-IoU round still finds the right object.
"""
import numpy as np

from sparsefusion import PipelineConfig, SceneConfig, generate_scene
from sparsefusion.assignment import NEGATIVE, query_in_box, two_round
from sparsefusion.pipeline import generate_queries
from sparsefusion.query import CAMERA, Query

scene = generate_scene(SceneConfig(seed=1000))
_, _, _, queries = generate_queries(scene, PipelineConfig(use_lidar=False))

moved, truth = [], []
for q in queries:
    cam = scene.cameras[q.camera_index]
    gi = scene.gt_index(scene.masks[q.source_mask[0]][q.source_mask[1]].instance_id)
    box = scene.gt[gi].box
    ray = (q.position - cam.position) / np.linalg.norm(q.position - cam.position)
    depth = float(np.dot(box.center - cam.position, ray)) + 0.75 * max(box.w, box.l) + 1.0
    moved.append(Query(q.point_indices, CAMERA, cam.position + depth * ray, q.source_box2,
                       q.class_hint, q.source_mask))
    truth.append(gi)

one = query_in_box(moved, scene.gt)
two = two_round(moved, scene.gt, scene.cameras)
print(f"{len(moved)} displaced camera queries")
print(f"  query-in-box negatives: {int(np.sum(one.gt_index == NEGATIVE))}")
print(f"  two-round correct:      {int(np.sum(two.gt_index == truth))}")
print("\n query  cam  truth  assigned  round   iou")
for i, q in enumerate(moved):
    print(f"{i:6d} {q.camera_index:4d} {truth[i]:6d} {two.gt_index[i]:9d}  {two.round[i]:>5}  {two.iou[i]:.2f}")
