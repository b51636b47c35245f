"""LiDAR-side query generation: voxel indexing, oracle foreground scoring and
voting, and connected-components clustering of voted centers."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .query import LIDAR, Query
from .scene import OP_SCORE, OP_VOTE, Scene, gt_membership, stream

DEFAULT_VOXEL_SIZE = (0.2, 0.2, 0.2)


@dataclass
class VoxelGrid:
    voxel_size: np.ndarray
    origin: np.ndarray
    coords: np.ndarray        # (K, 3) occupied voxel coordinates, sorted
    point_voxel: np.ndarray   # (N,) row of ``coords`` holding each point

    @property
    def cells(self) -> dict:
        order = np.argsort(self.point_voxel, kind="stable")
        bounds = np.searchsorted(self.point_voxel[order], np.arange(len(self.coords) + 1))
        return {tuple(int(c) for c in self.coords[k]): order[bounds[k]:bounds[k + 1]]
                for k in range(len(self.coords))}

    def __len__(self):
        return len(self.coords)


def voxelize(points: np.ndarray, voxel_size=DEFAULT_VOXEL_SIZE, origin=(0.0, 0.0, 0.0)) -> VoxelGrid:
    size = np.asarray(voxel_size, dtype=float).reshape(3)
    if not np.all(size > 0):
        raise ValueError(f"voxel_size must be positive, got {size}")
    origin = np.asarray(origin, dtype=float).reshape(3)
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    idx = np.floor((points - origin) / size).astype(np.int64)
    coords, inverse = np.unique(idx, axis=0, return_inverse=True)
    return VoxelGrid(size, origin, coords.reshape(-1, 3), inverse.reshape(-1))


def oracle_score(scene: Scene, flip_prob: float = 0.0, seed: int = 0) -> np.ndarray:
    """1 for points inside any GT box, else 0; each flipped with ``flip_prob``."""
    score = (gt_membership(scene) >= 0).astype(float)
    if flip_prob > 0:
        flip = stream(seed, OP_SCORE).random(len(score)) < flip_prob
        score[flip] = 1.0 - score[flip]
    return score


@dataclass
class Votes:
    point_index: np.ndarray   # (M,)
    centers: np.ndarray       # (M, 3)

    def __len__(self):
        return len(self.point_index)


def oracle_vote(scene: Scene, points: np.ndarray, scores: np.ndarray, fg_threshold: float = 0.5,
                sigma_m: float = 0.0, seed: int = 0) -> Votes:
    """True-foreground points vote for their GT center, others for themselves,
    both plus isotropic Gaussian noise of std ``sigma_m``."""
    points = np.asarray(points, dtype=float)
    owner = gt_membership(scene)
    keep = np.flatnonzero(np.asarray(scores) >= fg_threshold)
    centers = points[keep].copy()
    fg = owner[keep] >= 0
    if fg.any():
        gt_centers = np.array([g.box.center for g in scene.gt])
        centers[fg] = gt_centers[owner[keep][fg]]
    if sigma_m > 0:
        noise = stream(seed, OP_VOTE).normal(0.0, sigma_m, size=(len(points), 3))
        centers += noise[keep]
    return Votes(keep.astype(np.int64), centers)


_FORWARD_OFFSETS = [o for o in product((-1, 0, 1), repeat=3) if o > (0, 0, 0)]


def _hash_edges(pts: np.ndarray, radius: float):
    """Pairs (i < j) with squared distance <= radius**2, found through a
    spatial hash of cell size ``radius`` (27-cell neighborhoods)."""
    cells = np.floor(pts / radius).astype(np.int64)
    keys, inverse = np.unique(cells, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(keys) + 1))
    table = {tuple(k): order[bounds[i]:bounds[i + 1]] for i, k in enumerate(keys.tolist())}
    r2 = radius * radius
    rows, cols = [], []
    for key, members in table.items():
        a = pts[members]
        if len(members) > 1:
            d2 = _sqdist(a, a)
            i, j = np.nonzero(np.triu(d2 <= r2, k=1))
            rows.append(members[i])
            cols.append(members[j])
        for off in _FORWARD_OFFSETS:
            other = table.get((key[0] + off[0], key[1] + off[1], key[2] + off[2]))
            if other is None:
                continue
            i, j = np.nonzero(_sqdist(a, pts[other]) <= r2)
            rows.append(members[i])
            cols.append(other[j])
    if not rows:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(rows), np.concatenate(cols)


def _sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return diff[..., 0] ** 2 + diff[..., 1] ** 2 + diff[..., 2] ** 2


def ccl_labels(centers: np.ndarray, connect_radius_m: float) -> np.ndarray:
    """Connected-component label per row of ``centers``.

    Labels are numbered in order of first appearance.
    """
    if not connect_radius_m > 0:
        raise ValueError("connect_radius_m must be positive")
    centers = np.asarray(centers, dtype=float).reshape(-1, 3)
    if len(centers) == 0:
        return np.zeros(0, dtype=np.int64)
    # Coincident votes are common (noise-free voting); hash each location once.
    uniq, inverse = np.unique(centers, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    rows, cols = _hash_edges(uniq, connect_radius_m)
    n = len(uniq)
    graph = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    _, comp = connected_components(graph, directed=False)
    raw = comp[inverse]
    _, first = np.unique(raw, return_index=True)
    relabel = np.empty(raw.max() + 1, dtype=np.int64)
    relabel[raw[np.sort(first)]] = np.arange(len(first))
    return relabel[raw]


@dataclass
class Cluster:
    point_indices: np.ndarray
    position: np.ndarray
    modality: str = LIDAR


def ccl_cluster(votes: Votes, connect_radius_m: float = 0.5, min_cluster_points: int = 2,
                points: np.ndarray = None) -> list:
    """Cluster votes whose voted centers chain within ``connect_radius_m``.

    Components smaller than ``min_cluster_points`` are discarded. Clusters are
    returned ordered by their smallest point index. ``position`` is the mean of
    the member points when ``points`` is given, else of the voted centers.
    """
    labels = ccl_labels(votes.centers, connect_radius_m)
    clusters = []
    for lab in np.unique(labels):
        members = np.flatnonzero(labels == lab)
        if len(members) < min_cluster_points:
            continue
        idx = np.sort(votes.point_index[members])
        src = votes.centers[members] if points is None else np.asarray(points)[idx]
        clusters.append(Cluster(idx, src.mean(axis=0)))
    clusters.sort(key=lambda c: int(c.point_indices[0]))
    return clusters


def make_lidar_queries(clusters: list, points: np.ndarray) -> list:
    points = np.asarray(points, dtype=float)
    return [Query(c.point_indices, LIDAR, points[c.point_indices].mean(axis=0))
            for c in clusters]
