"""Run configuration shared by the library entry points and the CLI."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields
from typing import Optional

SEED_ENV_VAR = "SPARSEFUSION_SEED"


class ConfigError(ValueError):
    """Invalid configuration value; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class PipelineConfig:
    voxel_size: tuple = (0.2, 0.2, 0.2)
    connect_radius_m: float = 0.5
    min_cluster_points: int = 2
    fg_threshold: float = 0.5
    flip_prob: float = 0.0
    vote_sigma_m: float = 0.0
    depth_min_m: float = 0.5
    # None: 1.2 x the scene range.
    depth_max_m: Optional[float] = None
    score_floor: float = 1e-3
    iou2d_threshold: float = 0.5
    dedup_dist_m: float = 1.0
    eval_thresholds: tuple = (0.5, 1.0, 2.0, 4.0)
    seed: int = 0
    component_radius_m: float = 2.0
    bonus_camera: float = 1.0
    bonus_lidar: float = 0.9
    use_lidar: bool = True
    use_camera: bool = True

    def __post_init__(self):
        object.__setattr__(self, "voxel_size", tuple(float(v) for v in self.voxel_size))
        object.__setattr__(self, "eval_thresholds", tuple(float(v) for v in self.eval_thresholds))
        self.validate()

    def validate(self):
        if len(self.voxel_size) != 3 or not all(v > 0 for v in self.voxel_size):
            raise ConfigError("voxel_size", "needs three positive components")
        for name in ("connect_radius_m", "score_floor", "dedup_dist_m",
                     "component_radius_m", "depth_min_m"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, "must be positive")
        if self.depth_max_m is not None and not self.depth_max_m > self.depth_min_m:
            raise ConfigError("depth_max_m", "must exceed depth_min_m")
        if self.min_cluster_points < 1:
            raise ConfigError("min_cluster_points", "must be at least 1")
        for name in ("flip_prob", "iou2d_threshold", "bonus_camera", "bonus_lidar"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(name, "must lie in [0, 1]")
        if self.vote_sigma_m < 0:
            raise ConfigError("vote_sigma_m", "must be non-negative")
        if list(self.eval_thresholds) != sorted(self.eval_thresholds) or not self.eval_thresholds:
            raise ConfigError("eval_thresholds", "must be a non-empty ascending list")
        if self.seed < 0:
            raise ConfigError("seed", "must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["voxel_size"] = list(self.voxel_size)
        d["eval_thresholds"] = list(self.eval_thresholds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        for key in d:
            if key not in known:
                raise ConfigError(key, "unknown pipeline option")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError("pipeline", str(exc)) from exc


def resolve_seed(cli_seed: Optional[int], default: int = 0) -> int:
    """``SPARSEFUSION_SEED`` wins over ``--seed``, which wins over the config."""
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None and env != "":
        try:
            seed = int(env)
        except ValueError:
            raise ConfigError(SEED_ENV_VAR, f"not an integer: {env!r}") from None
    elif cli_seed is not None:
        seed = cli_seed
    else:
        seed = default
    if seed < 0:
        raise ConfigError("seed", "must be non-negative")
    return seed
