"""Shared value types: timed points, poses, voxel indices and labels."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class InputError(ValueError):
    """Malformed or missing input data (files, pose entries, logit records)."""


class RegistrationError(RuntimeError):
    """Scan registration could not find enough correspondences."""


class MovingLabel(enum.IntEnum):
    STATIC = 0
    MOVING = 1
    UNLABELED = 2


class VoxelIndex(NamedTuple):
    i: int
    j: int
    k: int


@dataclass(frozen=True)
class TimedPoint:
    """A 3D point with the timestamp and provenance of the scan it came from.

    ``ordinal`` is the point's position inside its originating scan, which is
    what file-backed logits are keyed by.
    """

    position: tuple[float, float, float]
    timestamp: float
    scan_index: int
    ordinal: int = 0


@dataclass
class PointCloud:
    """Struct-of-arrays container of timed points.

    This is the bulk form of a sequence of :class:`TimedPoint`; indexing with
    an int yields a ``TimedPoint``, indexing with a slice/mask/index array
    yields another ``PointCloud``.
    """

    positions: np.ndarray
    timestamps: np.ndarray
    scan_indices: np.ndarray
    ordinals: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        n = len(self.positions)
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64).reshape(n)
        self.scan_indices = np.asarray(self.scan_indices, dtype=np.int64).reshape(n)
        self.ordinals = np.asarray(self.ordinals, dtype=np.int64).reshape(n)

    @classmethod
    def empty(cls) -> PointCloud:
        return cls(np.zeros((0, 3)), np.zeros(0), np.zeros(0, np.int64), np.zeros(0, np.int64))

    @classmethod
    def from_scan(cls, positions: np.ndarray, timestamp: float, scan_index: int) -> PointCloud:
        """Wrap raw scan positions; every point gets the scan's timestamp and
        an ordinal equal to its row."""
        positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        n = len(positions)
        return cls(
            positions,
            np.full(n, float(timestamp)),
            np.full(n, int(scan_index), dtype=np.int64),
            np.arange(n, dtype=np.int64),
        )

    @classmethod
    def from_points(cls, points: Iterable[TimedPoint]) -> PointCloud:
        points = list(points)
        if not points:
            return cls.empty()
        return cls(
            np.array([p.position for p in points], dtype=np.float64),
            np.array([p.timestamp for p in points], dtype=np.float64),
            np.array([p.scan_index for p in points], dtype=np.int64),
            np.array([p.ordinal for p in points], dtype=np.int64),
        )

    @classmethod
    def concatenate(cls, clouds: Sequence[PointCloud]) -> PointCloud:
        if not clouds:
            return cls.empty()
        return cls(
            np.concatenate([c.positions for c in clouds]),
            np.concatenate([c.timestamps for c in clouds]),
            np.concatenate([c.scan_indices for c in clouds]),
            np.concatenate([c.ordinals for c in clouds]),
        )

    def __len__(self) -> int:
        return len(self.positions)

    def __getitem__(self, key):
        if isinstance(key, (int, np.integer)):
            p = self.positions[key]
            return TimedPoint(
                (float(p[0]), float(p[1]), float(p[2])),
                float(self.timestamps[key]),
                int(self.scan_indices[key]),
                int(self.ordinals[key]),
            )
        return PointCloud(
            self.positions[key], self.timestamps[key], self.scan_indices[key], self.ordinals[key]
        )

    def __iter__(self):
        for idx in range(len(self)):
            yield self[idx]

    def transformed(self, pose: Pose) -> PointCloud:
        return PointCloud(pose.apply(self.positions), self.timestamps, self.scan_indices, self.ordinals)


def as_point_cloud(points) -> PointCloud:
    if isinstance(points, PointCloud):
        return points
    return PointCloud.from_points(points)


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform ``x -> rotation @ x + translation``.

    Construction checks that ``rotation`` is a proper rotation to within
    ``tol``. Poses read from text files carry only a few significant digits,
    so loaders pass a looser tolerance.
    """

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    tol: float = field(default=1e-9, repr=False, compare=False)

    def __post_init__(self):
        R = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValueError("pose contains non-finite values")
        if np.max(np.abs(R.T @ R - np.eye(3))) > self.tol or abs(np.linalg.det(R) - 1.0) > self.tol:
            raise ValueError("rotation is not orthonormal with det +1")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> Pose:
        return cls()

    @classmethod
    def from_matrix(cls, matrix, tol: float = 1e-9) -> Pose:
        """Build from a 3x4 ``[R|t]`` or a 4x4 homogeneous matrix."""
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape not in ((3, 4), (4, 4)):
            raise ValueError(f"expected a 3x4 or 4x4 matrix, got shape {m.shape}")
        return cls(m[:3, :3], m[:3, 3], tol=tol)

    @classmethod
    def from_rotvec(cls, rotvec, translation) -> Pose:
        from scipy.spatial.transform import Rotation

        return cls(Rotation.from_rotvec(np.asarray(rotvec, dtype=np.float64)).as_matrix(), translation)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def compose(self, other: Pose) -> Pose:
        """``self ∘ other``: apply ``other`` first, then ``self``."""
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
            tol=max(self.tol, other.tol),
        )

    def __matmul__(self, other: Pose) -> Pose:
        return self.compose(other)

    def inverse(self) -> Pose:
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation, tol=self.tol)

    def normalized(self) -> Pose:
        """Project the rotation back onto SO(3) (nearest in Frobenius norm)."""
        return Pose(orthonormalize(self.rotation), self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.translation


def orthonormalize(R: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=np.float64))
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


# 21 bits per axis; the offset keeps packed keys ordered lexicographically by (i, j, k).
_KEY_BITS = 21
_KEY_OFFSET = 1 << (_KEY_BITS - 1)
_KEY_MASK = (1 << _KEY_BITS) - 1


def voxelize(p, voxel_size: float) -> VoxelIndex:
    """Grid index of the cube ``[i*s, (i+1)*s) x ...`` containing ``p``."""
    if not voxel_size > 0:
        raise ValueError("voxel_size must be positive")
    x, y, z = (float(c) for c in p)
    if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
        raise ValueError(f"cannot voxelize non-finite point {p!r}")
    return VoxelIndex(math.floor(x / voxel_size), math.floor(y / voxel_size), math.floor(z / voxel_size))


def voxelize_array(points: np.ndarray, voxel_size: float) -> np.ndarray:
    """Vectorised :func:`voxelize`; returns an ``(N, 3)`` int64 array."""
    if not voxel_size > 0:
        raise ValueError("voxel_size must be positive")
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if not np.all(np.isfinite(points)):
        raise ValueError("cannot voxelize non-finite points")
    return np.floor(points / voxel_size).astype(np.int64)


def pack_indices(indices: np.ndarray) -> np.ndarray:
    """Pack ``(N, 3)`` voxel indices into int64 hash keys."""
    shifted = np.asarray(indices, dtype=np.int64).reshape(-1, 3) + _KEY_OFFSET
    if shifted.size and (shifted.min() < 0 or shifted.max() > _KEY_MASK):
        raise ValueError("voxel index outside the representable grid (±2^20 cells per axis)")
    return (shifted[:, 0] << (2 * _KEY_BITS)) | (shifted[:, 1] << _KEY_BITS) | shifted[:, 2]


def unpack_keys(keys: np.ndarray) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.int64).reshape(-1)
    out = np.empty((len(keys), 3), dtype=np.int64)
    out[:, 0] = (keys >> (2 * _KEY_BITS)) & _KEY_MASK
    out[:, 1] = (keys >> _KEY_BITS) & _KEY_MASK
    out[:, 2] = keys & _KEY_MASK
    return out - _KEY_OFFSET


def logodds_to_prob(l):
    """Logistic function ``e^l / (1 + e^l)``, evaluated without overflow.

    For tiny nonzero ``l`` the result is nudged one ulp off 0.5 so that
    ``p > 0.5`` holds exactly when ``l > 0``.
    """
    l = np.asarray(l, dtype=np.float64)
    e = np.exp(-np.abs(l))
    p = np.where(l >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    p = np.where((l > 0) & (p <= 0.5), np.nextafter(0.5, 1.0), p)
    p = np.where((l < 0) & (p >= 0.5), np.nextafter(0.5, 0.0), p)
    return float(p) if p.ndim == 0 else p


def prob_to_logodds(p):
    p = np.asarray(p, dtype=np.float64)
    l = np.log(p) - np.log1p(-p)
    return float(l) if l.ndim == 0 else l


def check_logits(values, n: int | None = None) -> np.ndarray:
    """Validate a logit set: 1-D, finite, and of length ``n`` when given."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if n is not None and len(values) != n:
        raise ValueError(f"logit count {len(values)} does not match point count {n}")
    if not np.all(np.isfinite(values)):
        raise ValueError("logits must be finite")
    return values
