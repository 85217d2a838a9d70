"""Volumetric belief map of dynamic occupancy.

Every voxel stores the log-odds that its volume is traversed by moving
objects. Voxels are independent binary states, each updated by a binary
Bayes filter whose per-scan measurement is the arithmetic mean of the logits
of all points that fell into the voxel during that scan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .core import (
    MovingLabel,
    PointCloud,
    TimedPoint,
    VoxelIndex,
    check_logits,
    logodds_to_prob,
    pack_indices,
    unpack_keys,
    voxelize_array,
)


@dataclass(frozen=True)
class VoxelUpdate:
    index: VoxelIndex
    mean_logit: float
    contributing_points: int


@dataclass
class VoxelUpdates:
    """Batch of per-voxel measurements, sorted by voxel index."""

    keys: np.ndarray  # packed voxel keys, int64
    mean_logits: np.ndarray
    counts: np.ndarray

    def __len__(self) -> int:
        return len(self.keys)

    @property
    def indices(self) -> np.ndarray:
        return unpack_keys(self.keys)

    def __iter__(self) -> Iterator[VoxelUpdate]:
        for (i, j, k), m, c in zip(self.indices.tolist(), self.mean_logits.tolist(), self.counts.tolist()):
            yield VoxelUpdate(VoxelIndex(i, j, k), m, c)

    @classmethod
    def from_updates(cls, updates: Iterable[VoxelUpdate]) -> VoxelUpdates:
        updates = list(updates)
        if not updates:
            return cls(np.zeros(0, np.int64), np.zeros(0), np.zeros(0, np.int64))
        return cls(
            pack_indices(np.array([u.index for u in updates], dtype=np.int64)),
            np.array([u.mean_logit for u in updates], dtype=np.float64),
            np.array([u.contributing_points for u in updates], dtype=np.int64),
        )


class BeliefMap:
    """Hash map from voxel to log-odds of dynamic occupancy.

    Args:
        voxel_size: edge length of a belief voxel in meters.
        prior_logodds: log-odds of the prior; absent voxels hold this value.
        clip_range: points farther than this from the sensor origin are not fused.
        logodds_clamp: stored values are clamped to ``[-clamp, clamp]``;
            ``None`` or ``inf`` disables clamping.
    """

    def __init__(
        self,
        voxel_size: float = 0.25,
        prior_logodds: float = 0.0,
        clip_range: float = 150.0,
        logodds_clamp: float | None = 8.0,
    ):
        if voxel_size <= 0:
            raise ValueError("voxel_size must be positive")
        self.voxel_size = float(voxel_size)
        self.prior_logodds = float(prior_logodds)
        self.clip_range = float(clip_range)
        self.logodds_clamp = math.inf if logodds_clamp is None else float(logodds_clamp)
        self._slots: dict[int, int] = {}
        self._keys = np.zeros(64, dtype=np.int64)
        self._values = np.zeros(64, dtype=np.float64)
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def aggregate(self, points, logits, origin=(0.0, 0.0, 0.0)) -> VoxelUpdates:
        """Group points by voxel and average their logits.

        Points farther than ``clip_range`` from ``origin`` are skipped. Per
        voxel, logits are summed in ascending point order, so the result is
        reproducible bit for bit.
        """
        positions = _positions(points)
        logits = check_logits(logits, len(positions))
        origin = np.asarray(origin, dtype=np.float64).reshape(3)
        in_range = np.linalg.norm(positions - origin, axis=1) <= self.clip_range
        positions = positions[in_range]
        logits = logits[in_range]
        if len(positions) == 0:
            return VoxelUpdates(np.zeros(0, np.int64), np.zeros(0), np.zeros(0, np.int64))
        keys = pack_indices(voxelize_array(positions, self.voxel_size))
        uniq, inverse = np.unique(keys, return_inverse=True)
        # bincount accumulates in input order
        sums = np.bincount(inverse, weights=logits, minlength=len(uniq))
        counts = np.bincount(inverse, minlength=len(uniq))
        return VoxelUpdates(uniq, sums / counts, counts)

    def _lookup_slots(self, keys: np.ndarray) -> np.ndarray:
        get = self._slots.get
        return np.fromiter((get(k, -1) for k in keys.tolist()), dtype=np.int64, count=len(keys))

    def _grow(self, needed: int):
        cap = len(self._values)
        if needed <= cap:
            return
        while cap < needed:
            cap *= 2
        self._keys = np.resize(self._keys, cap)
        self._values = np.resize(self._values, cap)

    def update(self, updates) -> int:
        """Fold per-voxel measurements into the map; returns the number of
        voxels touched."""
        if not isinstance(updates, VoxelUpdates):
            updates = VoxelUpdates.from_updates(updates)
        if len(updates) == 0:
            return 0
        if len(np.unique(updates.keys)) != len(updates.keys):
            # repeated voxels must be applied one after another
            touched = set()
            for n in range(len(updates)):
                self.update(VoxelUpdates(updates.keys[n : n + 1], updates.mean_logits[n : n + 1], updates.counts[n : n + 1]))
                touched.add(int(updates.keys[n]))
            return len(touched)

        slots = self._lookup_slots(updates.keys)
        fresh = slots < 0
        n_fresh = int(fresh.sum())
        if n_fresh:
            self._grow(self._size + n_fresh)
            new_slots = np.arange(self._size, self._size + n_fresh)
            self._keys[new_slots] = updates.keys[fresh]
            self._values[new_slots] = self.prior_logodds
            self._slots.update(zip(updates.keys[fresh].tolist(), new_slots.tolist()))
            slots[fresh] = new_slots
            self._size += n_fresh
        value = self._values[slots] + updates.mean_logits - self.prior_logodds
        self._values[slots] = np.clip(value, -self.logodds_clamp, self.logodds_clamp)
        return len(updates)

    def integrate(self, points, logits, origin=(0.0, 0.0, 0.0)) -> int:
        return self.update(self.aggregate(points, logits, origin))

    def logodds(self, points) -> np.ndarray:
        """Stored log-odds of the voxel of each point (prior when absent)."""
        positions = _positions(points)
        if len(positions) == 0:
            return np.zeros(0)
        slots = self._lookup_slots(pack_indices(voxelize_array(positions, self.voxel_size)))
        return np.where(slots >= 0, self._values[np.maximum(slots, 0)], self.prior_logodds)

    def query(self, points) -> np.ndarray:
        """Per-point labels (``MovingLabel`` values, uint8): moving iff the
        voxel's probability is strictly above 0.5."""
        moving = self.logodds(points) > 0.0
        return np.where(moving, MovingLabel.MOVING, MovingLabel.STATIC).astype(np.uint8)

    def query_probability(self, points) -> np.ndarray:
        """Posterior probability of dynamic occupancy for each point's voxel."""
        return logodds_to_prob(self.logodds(points))

    def probability_at(self, point) -> float:
        """:meth:`query_probability` for a single point."""
        return float(self.query_probability(_positions(point))[0])

    def value(self, index) -> float:
        """Log-odds stored for a voxel index (prior when absent)."""
        key = int(pack_indices(np.asarray(index, dtype=np.int64).reshape(1, 3))[0])
        slot = self._slots.get(key)
        return self.prior_logodds if slot is None else float(self._values[slot])

    def set_value(self, index, logodds: float) -> None:
        """Overwrite one voxel; intended for tests and checkpoint restore."""
        logodds = float(np.clip(logodds, -self.logodds_clamp, self.logodds_clamp))
        key = int(pack_indices(np.asarray(index, dtype=np.int64).reshape(1, 3))[0])
        slot = self._slots.get(key)
        if slot is None:
            self._grow(self._size + 1)
            slot = self._size
            self._keys[slot] = key
            self._slots[key] = slot
            self._size += 1
        self._values[slot] = logodds

    def cells(self) -> tuple[np.ndarray, np.ndarray]:
        """All stored voxels as ``(indices (M, 3), logodds (M,))`` sorted by index."""
        keys = self._keys[: self._size]
        order = np.argsort(keys, kind="stable")
        return unpack_keys(keys[order]), self._values[: self._size][order].copy()

    def as_dict(self) -> dict[VoxelIndex, float]:
        indices, values = self.cells()
        return {VoxelIndex(*idx): v for idx, v in zip(indices.tolist(), values.tolist())}


def _positions(points) -> np.ndarray:
    if isinstance(points, PointCloud):
        return points.positions
    if isinstance(points, TimedPoint):
        return np.asarray(points.position, dtype=np.float64).reshape(1, 3)
    if isinstance(points, (list, tuple)) and points and isinstance(points[0], TimedPoint):
        return np.array([p.position for p in points], dtype=np.float64)
    return np.asarray(points, dtype=np.float64).reshape(-1, 3)
