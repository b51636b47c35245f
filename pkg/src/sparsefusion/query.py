"""The instance unit shared by both modalities."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .geometry import Box2

LIDAR = "lidar"
CAMERA = "camera"


@dataclass
class Query:
    """A point cluster proposed as one object instance.

    ``point_indices`` index the scene cloud; a point may appear in several
    camera queries when frustums overlap. Camera queries carry the
    ``(camera_index, Box2)`` of their source mask and the mask's position in
    that camera's mask list (``source_mask``); LiDAR queries carry neither.
    """

    point_indices: np.ndarray
    modality: str
    position: np.ndarray
    source_box2: Optional[tuple] = None
    class_hint: Optional[int] = None
    source_mask: Optional[tuple] = None

    def __post_init__(self):
        self.point_indices = np.asarray(self.point_indices, dtype=np.int64)
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        if len(self.point_indices) == 0:
            raise ValueError("a query needs at least one point")
        if self.modality not in (LIDAR, CAMERA):
            raise ValueError(f"unknown modality {self.modality!r}")
        if (self.modality == CAMERA) != (self.source_box2 is not None):
            raise ValueError("camera queries, and only camera queries, carry source_box2")

    @property
    def camera_index(self) -> Optional[int]:
        return None if self.source_box2 is None else self.source_box2[0]

    @property
    def box2(self) -> Optional[Box2]:
        return None if self.source_box2 is None else self.source_box2[1]

    def with_points(self, indices: np.ndarray, position: np.ndarray) -> "Query":
        return replace(self, point_indices=np.asarray(indices, dtype=np.int64),
                       position=np.asarray(position, dtype=float))

    def __len__(self):
        return len(self.point_indices)
