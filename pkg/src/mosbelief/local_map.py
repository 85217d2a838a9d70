"""Sparse voxel-hashed local map of timestamped points.

Points keep their original (unsnapped) map-frame coordinates together with
their timestamp and provenance. Each voxel holds at most
``max_points_per_voxel`` points; once full, further points are dropped.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial import cKDTree

from .core import PointCloud, Pose, TimedPoint, pack_indices, unpack_keys, voxelize_array


class LocalMap:
    def __init__(self, voxel_size: float = 0.5, max_points_per_voxel: int = 20, max_range: float = 100.0):
        if voxel_size <= 0 or max_points_per_voxel <= 0 or max_range <= 0:
            raise ValueError("voxel_size, max_points_per_voxel and max_range must be positive")
        self.voxel_size = float(voxel_size)
        self.max_points_per_voxel = int(max_points_per_voxel)
        self.max_range = float(max_range)
        self.clear()

    def clear(self):
        self._points = PointCloud.empty()
        self._keys = np.zeros(0, dtype=np.int64)
        self._seq = np.zeros(0, dtype=np.int64)
        self._next_seq = 0
        self._counts: dict[int, int] = {}
        self._tree = None
        self._cell_index = None

    def __len__(self) -> int:
        return len(self._points)

    @property
    def num_cells(self) -> int:
        return len(self._counts)

    def empty(self) -> bool:
        return len(self._points) == 0

    def _invalidate(self):
        self._tree = None
        self._cell_index = None

    def insert(self, scan: PointCloud, pose: Pose | None = None) -> int:
        """Transform ``scan`` into the map frame and add it; returns how many
        points were actually stored (full voxels reject the rest)."""
        if pose is not None:
            scan = scan.transformed(pose)
        if len(scan) == 0:
            return 0
        keys = pack_indices(voxelize_array(scan.positions, self.voxel_size))
        uniq, inverse = np.unique(keys, return_inverse=True)
        # rank of each point among the points of this scan that share its voxel
        order = np.argsort(inverse, kind="stable")
        group_start = np.searchsorted(inverse[order], np.arange(len(uniq)))
        rank = np.empty(len(keys), dtype=np.int64)
        rank[order] = np.arange(len(keys)) - group_start[inverse[order]]

        existing = np.fromiter((self._counts.get(k, 0) for k in uniq.tolist()), dtype=np.int64, count=len(uniq))
        keep = rank < (self.max_points_per_voxel - existing)[inverse]
        if not keep.any():
            return 0
        added = np.bincount(inverse[keep], minlength=len(uniq))
        for k, c in zip(uniq.tolist(), added.tolist()):
            if c:
                self._counts[k] = self._counts.get(k, 0) + c

        n_new = int(keep.sum())
        self._points = PointCloud.concatenate([self._points, scan[keep]])
        self._keys = np.concatenate([self._keys, keys[keep]])
        self._seq = np.concatenate([self._seq, self._next_seq + np.arange(n_new)])
        self._next_seq += n_new
        self._invalidate()
        return n_new

    def prune(self, origin) -> int:
        """Drop every voxel whose center is farther than ``max_range`` from
        ``origin``. Returns the number of voxels removed."""
        if self.empty():
            return 0
        origin = np.asarray(origin, dtype=np.float64).reshape(3)
        centers = (unpack_keys(self._keys) + 0.5) * self.voxel_size
        far = np.linalg.norm(centers - origin, axis=1) > self.max_range
        if not far.any():
            return 0
        removed = set(np.unique(self._keys[far]).tolist())
        for k in removed:
            del self._counts[k]
        keep = ~far
        self._points = self._points[keep]
        self._keys = self._keys[keep]
        self._seq = self._seq[keep]
        self._invalidate()
        return len(removed)

    def snapshot_points(self) -> PointCloud:
        """All stored points, ordered by voxel index then insertion order."""
        order = np.lexsort((self._seq, self._keys))
        return self._points[order]

    def _kdtree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self._points.positions)
        return self._tree

    def nearest_neighbors(self, queries: np.ndarray, search_radius: float) -> tuple[np.ndarray, np.ndarray]:
        """Batch nearest-neighbour lookup.

        Returns ``(distances, rows)``; queries without a stored point inside
        ``search_radius`` get distance ``inf`` and row ``-1``. Rows index
        :attr:`points`.
        """
        queries = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
        if self.empty():
            return np.full(len(queries), np.inf), np.full(len(queries), -1, dtype=np.int64)
        dist, rows = self._kdtree().query(queries, k=1, distance_upper_bound=search_radius)
        rows = np.where(np.isfinite(dist), rows, -1).astype(np.int64)
        return dist, rows

    @property
    def points(self) -> PointCloud:
        """Stored points in storage order (see :meth:`nearest_neighbors`)."""
        return self._points

    def _cells(self) -> dict[int, np.ndarray]:
        if self._cell_index is None:
            order = np.argsort(self._keys, kind="stable")
            uniq, starts = np.unique(self._keys[order], return_index=True)
            bounds = np.append(starts, len(order))
            self._cell_index = {
                k: order[bounds[n] : bounds[n + 1]] for n, k in enumerate(uniq.tolist())
            }
        return self._cell_index

    def nearest_neighbor(self, q, search_radius: float) -> tuple[TimedPoint, float] | None:
        """Closest stored point within ``search_radius`` of ``q``, found by
        scanning only the voxels that can contain such a point."""
        if search_radius <= 0:
            raise ValueError("search_radius must be positive")
        q = np.asarray(q, dtype=np.float64).reshape(3)
        center = voxelize_array(q[None], self.voxel_size)[0]
        reach = max(1, math.ceil(search_radius / self.voxel_size))
        offsets = np.arange(-reach, reach + 1)
        grid = np.stack(np.meshgrid(offsets, offsets, offsets, indexing="ij"), axis=-1).reshape(-1, 3)
        cells = self._cells()
        rows = [cells[k] for k in pack_indices(center + grid).tolist() if k in cells]
        if not rows:
            return None
        rows = np.concatenate(rows)
        d = np.linalg.norm(self._points.positions[rows] - q, axis=1)
        best = int(np.argmin(d))
        if d[best] > search_radius:
            return None
        return self._points[int(rows[best])], float(d[best])
