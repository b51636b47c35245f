"""JSON documents for scenes, detections and run configuration.

Floats are written with 17 significant digits, so ``load(save(x))``
reproduces every double exactly. Mask bitmaps are run-length encoded over
the row-major flattened bitmap: ``rle`` lists alternating run lengths,
starting with a (possibly empty) run of unset bits.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .config import ConfigError, PipelineConfig
from .geometry import Box2, Box3, CameraModel, camera_ring
from .refine import Detection
from .scene import ClassSpec, GroundTruth, InstanceMask, MaskNoise, Scene, SceneConfig

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """Malformed document; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# --------------------------------------------------------------------------
# JSON text

def _emit(obj: Any, out: list, indent: int, level: int):
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError(f"cannot serialize non-finite float {v}")
        text = format(v, ".17g")
        if not any(c in text for c in ".en"):
            text += ".0"
        out.append(text)
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for k, (key, val) in enumerate(obj.items()):
            out.append(("," if k else "") + pad + json.dumps(str(key)) + ": ")
            _emit(val, out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not seq:
            out.append("[]")
            return
        # Numeric rows stay on one line.
        flat = all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq)
        out.append("[")
        for k, val in enumerate(seq):
            out.append(("," if k else "") + ("" if flat else pad))
            if flat and k:
                out.append(" ")
            _emit(val, out, indent, level + 1)
        out.append(("" if flat else end) + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 1) -> str:
    out: list = []
    _emit(obj, out, indent, 0)
    return "".join(out) + "\n"


def write_json(path, obj: Any):
    Path(path).write_text(dumps(obj))


def read_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(str(path), f"invalid JSON ({exc})") from None


def _need(d: dict, key: str, ctx: str):
    if not isinstance(d, dict) or key not in d:
        raise SchemaError(f"{ctx}.{key}", "missing")
    return d[key]


def _check_header(d: dict, kind: str):
    version = _need(d, "schema_version", kind)
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{kind}.schema_version",
                          f"expected {SCHEMA_VERSION}, found {version!r}")
    found = _need(d, "kind", kind)
    if found != kind:
        raise SchemaError(f"{kind}.kind", f"expected {kind!r}, found {found!r}")


# --------------------------------------------------------------------------
# bitmaps

def rle_encode(bitmap: np.ndarray) -> list:
    flat = np.asarray(bitmap, dtype=bool).ravel()
    if flat.size == 0:
        return []
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(edges).tolist()
    if flat[0]:
        runs = [0] + runs
    return runs


def rle_decode(runs: list, shape) -> np.ndarray:
    h, w = (int(s) for s in shape)
    if any((not isinstance(r, int)) or r < 0 for r in runs) or sum(runs) != h * w:
        raise SchemaError("mask.rle", f"run lengths must be non-negative and sum to {h * w}")
    values = np.arange(len(runs)) % 2 == 1
    return np.repeat(values, runs).reshape(h, w)


# --------------------------------------------------------------------------
# pieces

def camera_to_dict(cam: CameraModel) -> dict:
    return {"fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
            "rotation": cam.rotation.tolist(), "translation": cam.translation.tolist(),
            "image_w": cam.image_w, "image_h": cam.image_h}


def camera_from_dict(d: dict) -> CameraModel:
    try:
        return CameraModel(fx=float(d["fx"]), fy=float(d["fy"]), cx=float(d["cx"]), cy=float(d["cy"]),
                           rotation=np.array(d["rotation"], dtype=float),
                           translation=np.array(d["translation"], dtype=float),
                           image_w=int(d["image_w"]), image_h=int(d["image_h"]))
    except KeyError as exc:
        raise SchemaError(f"camera.{exc.args[0]}", "missing") from None


def box_to_dict(b: Box3) -> dict:
    return {"center": b.center.tolist(), "dims": b.dims.tolist(), "yaw": b.yaw}


def box_from_dict(d: dict, ctx: str = "box") -> Box3:
    return Box3(np.array(_need(d, "center", ctx), dtype=float),
                np.array(_need(d, "dims", ctx), dtype=float), float(_need(d, "yaw", ctx)))


def class_to_dict(c: ClassSpec) -> dict:
    return {"class_id": c.class_id, "name": c.name, "size_prior": list(c.size_prior),
            "size_jitter": c.size_jitter, "surface_point_rate": c.surface_point_rate}


def class_from_dict(d: dict) -> ClassSpec:
    try:
        return _class_from_dict(d)
    except ValueError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise ConfigError("scene.classes", str(exc)) from None


def _class_from_dict(d: dict) -> ClassSpec:
    return ClassSpec(int(_need(d, "class_id", "class")), str(_need(d, "name", "class")),
                     tuple(_need(d, "size_prior", "class")),
                     float(d.get("size_jitter", 0.1)), float(d.get("surface_point_rate", 25.0)))


_SCENE_SCALARS = ("range_m", "n_objects", "background_points", "point_dropout",
                  "distance_attenuation_exp", "min_center_gap", "seed", "ego_clearance_m")


def scene_config_to_dict(cfg: SceneConfig) -> dict:
    d = {k: getattr(cfg, k) for k in _SCENE_SCALARS}
    d["classes"] = [class_to_dict(c) for c in cfg.classes]
    d["cameras"] = [camera_to_dict(c) for c in cfg.cameras]
    return d


def scene_config_from_dict(d: dict) -> SceneConfig:
    """Scene configuration; ``cameras`` may be an explicit list or a
    ``camera_ring`` spec ``{"n", "height", "image_w", "image_h"}``."""
    known = set(_SCENE_SCALARS) | {"classes", "cameras", "camera_ring"}
    for key in d:
        if key not in known:
            raise ConfigError(f"scene.{key}", "unknown scene option")
    kw = {k: d[k] for k in _SCENE_SCALARS if k in d}
    for k in ("n_objects", "background_points", "seed"):
        if k in kw:
            if not isinstance(kw[k], int) or isinstance(kw[k], bool):
                raise ConfigError(f"scene.{k}", "must be an integer")
    if "classes" in d:
        kw["classes"] = tuple(class_from_dict(c) for c in d["classes"])
    if "cameras" in d:
        kw["cameras"] = tuple(camera_from_dict(c) for c in d["cameras"])
    elif "camera_ring" in d:
        kw["cameras"] = tuple(camera_ring(**d["camera_ring"]))
    try:
        return SceneConfig(**kw)
    except TypeError as exc:
        raise ConfigError("scene", str(exc)) from None
    except ValueError as exc:
        field = str(exc).split()[0]
        raise ConfigError(f"scene.{field}", str(exc)) from None


def mask_to_dict(m: InstanceMask) -> dict:
    return {"camera_index": m.camera_index, "instance_id": m.instance_id, "class_id": m.class_id,
            "bbox2": [m.bbox2.min_x, m.bbox2.min_y, m.bbox2.max_x, m.bbox2.max_y],
            "shape": list(m.bitmap.shape), "rle": rle_encode(m.bitmap)}


def mask_from_dict(d: dict) -> InstanceMask:
    bitmap = rle_decode(_need(d, "rle", "mask"), _need(d, "shape", "mask"))
    m = InstanceMask(int(d["camera_index"]), d["instance_id"], int(d["class_id"]), bitmap)
    stored = Box2(*(float(v) for v in _need(d, "bbox2", "mask")))
    if stored != m.bbox2:
        raise SchemaError("mask.bbox2", "does not match the tight bounds of the bitmap")
    return m


# --------------------------------------------------------------------------
# documents

def scene_to_dict(scene: Scene) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "scene",
        "config": scene_config_to_dict(scene.config),
        "gt": [{"instance_id": g.instance_id, "class_id": g.class_id, **box_to_dict(g.box)}
               for g in scene.gt],
        "points": scene.points.tolist(),
        "point_instance": scene.point_instance.tolist(),
        "masks": [[mask_to_dict(m) for m in per_cam] for per_cam in scene.masks],
    }


def scene_from_dict(d: dict) -> Scene:
    _check_header(d, "scene")
    cfg = scene_config_from_dict(_need(d, "config", "scene"))
    gt = [GroundTruth(box_from_dict(g, "scene.gt"), int(g["class_id"]), int(g["instance_id"]))
          for g in _need(d, "gt", "scene")]
    points = np.array(_need(d, "points", "scene"), dtype=float).reshape(-1, 3)
    owner = np.array(_need(d, "point_instance", "scene"), dtype=np.int64).reshape(-1)
    if len(owner) != len(points):
        raise SchemaError("scene.point_instance", "length differs from points")
    masks = [[mask_from_dict(m) for m in per_cam] for per_cam in _need(d, "masks", "scene")]
    if len(masks) != len(cfg.cameras):
        raise SchemaError("scene.masks", "needs one mask list per camera")
    return Scene(gt, points, owner, list(cfg.cameras), masks, cfg)


def save_scene(scene: Scene, path):
    write_json(path, scene_to_dict(scene))


def load_scene(path) -> Scene:
    return scene_from_dict(read_json(path))


def detection_to_dict(d: Detection) -> dict:
    return {**box_to_dict(d.box), "class_id": d.class_id, "score": d.score,
            "provenance": d.provenance,
            "source_mask": None if d.source_mask is None else list(d.source_mask)}


def detection_from_dict(d: dict) -> Detection:
    src = d.get("source_mask")
    return Detection(box_from_dict(d, "detection"), int(_need(d, "class_id", "detection")),
                     float(_need(d, "score", "detection")), str(_need(d, "provenance", "detection")),
                     None if src is None else tuple(int(v) for v in src))


def detections_to_dict(dets, scene_name: str = "", counts: dict = None) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": "detections", "scene": scene_name,
            "counts": dict(counts or {}), "detections": [detection_to_dict(d) for d in dets]}


def detections_from_dict(d: dict) -> list:
    _check_header(d, "detections")
    return [detection_from_dict(x) for x in _need(d, "detections", "detections")]


def save_detections(dets, path, scene_name: str = "", counts: dict = None):
    write_json(path, detections_to_dict(dets, scene_name, counts))


def load_detections(path) -> list:
    return detections_from_dict(read_json(path))


_NOISE_FIELDS = ("drop_prob", "dilate_px", "erode_px", "spurious_prob", "merge_prob")


def mask_noise_from_dict(d: dict) -> MaskNoise:
    for key in d:
        if key not in _NOISE_FIELDS:
            raise ConfigError(f"mask_noise.{key}", "unknown mask noise option")
    try:
        return MaskNoise(**d)
    except ValueError as exc:
        raise ConfigError(f"mask_noise.{str(exc).split()[0]}", str(exc)) from None


def config_to_dict(pipeline: PipelineConfig, scene: SceneConfig,
                   noise: MaskNoise = MaskNoise()) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": "config",
            "pipeline": pipeline.to_dict(), "scene": scene_config_to_dict(scene),
            "mask_noise": {k: getattr(noise, k) for k in _NOISE_FIELDS}}


def config_from_dict(d: dict):
    """Returns ``(PipelineConfig, SceneConfig, MaskNoise)``; absent sections
    take their defaults."""
    _check_header(d, "config")
    for key in d:
        if key not in ("schema_version", "kind", "pipeline", "scene", "mask_noise"):
            raise ConfigError(key, "unknown config section")
    pipeline = d.get("pipeline", {})
    if "seed" in pipeline and (not isinstance(pipeline["seed"], int)
                               or isinstance(pipeline["seed"], bool)):
        raise ConfigError("pipeline.seed", "must be an integer")
    pipeline = PipelineConfig.from_dict(pipeline)
    scene = scene_config_from_dict(d.get("scene", {}))
    noise = mask_noise_from_dict(d.get("mask_noise", {}))
    return pipeline, scene, noise


def load_config(path):
    return config_from_dict(read_json(path))
