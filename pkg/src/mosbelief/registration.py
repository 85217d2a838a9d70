"""Scan-to-map registration.

A compact point-to-point ICP with a Cauchy robust weight, seeded by a
constant-velocity motion model, plus a pass-through path for externally
supplied poses.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .core import InputError, PointCloud, Pose, RegistrationError, orthonormalize, pack_indices, voxelize_array
from .local_map import LocalMap

logger = logging.getLogger(__name__)

MIN_CORRESPONDENCES = 10


@dataclass
class OdometryConfig:
    downsample_voxel_size: float = 0.5
    max_iterations: int = 100
    convergence_threshold: float = 1e-4
    max_correspondence_distance: float = 1.0
    robust_kernel_scale: float = 0.5

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if not getattr(self, name) > 0:
                raise ValueError(f"OdometryConfig.{name} must be positive")


@dataclass
class OdometryState:
    last_pose: Pose = field(default_factory=Pose.identity)
    last_delta: Pose = field(default_factory=Pose.identity)

    def predict(self) -> Pose:
        """Constant-velocity guess for the next pose."""
        return self.last_pose @ self.last_delta

    def advance(self, pose: Pose):
        self.last_delta = (self.last_pose.inverse() @ pose).normalized()
        self.last_pose = pose


@dataclass
class IcpResult:
    pose: Pose
    iterations: int
    converged: bool
    # mean correspondence distance of every evaluated iterate
    residuals: list[float]
    # residuals of the iterates that improved on all earlier ones
    accepted_residuals: list[float]


def voxel_downsample(points: np.ndarray, voxel_size: float) -> np.ndarray:
    """Keep the first point falling into each voxel, in input order."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0:
        return points
    keys = pack_indices(voxelize_array(points, voxel_size))
    _, first = np.unique(keys, return_index=True)
    return points[np.sort(first)]


def _weighted_kabsch(src: np.ndarray, dst: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rigid (R, t) minimising sum w * |R src + t - dst|^2."""
    w = w / w.sum()
    mu_s = w @ src
    mu_d = w @ dst
    H = (src - mu_s).T @ ((dst - mu_d) * w[:, None])
    U, _, Vt = np.linalg.svd(H)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(Vt.T @ U.T))])
    R = Vt.T @ D @ U.T
    return R, mu_d - R @ mu_s


def icp(source: np.ndarray, local_map: LocalMap, initial: Pose, config: OdometryConfig) -> IcpResult:
    """Align sensor-frame ``source`` points to ``local_map`` starting at ``initial``.

    Each iteration matches every transformed source point to its nearest map
    point within ``max_correspondence_distance``, solves the weighted
    point-to-point problem in closed form, and left-multiplies the increment
    onto the running estimate.

    An iterate is accepted only if its mean correspondence distance does not
    exceed that of every earlier iterate; the last accepted one is returned.

    Raises:
        RegistrationError: fewer than ``MIN_CORRESPONDENCES`` matches.
    """
    source = np.asarray(source, dtype=np.float64).reshape(-1, 3)
    R = initial.rotation.copy()
    t = initial.translation.copy()
    residuals, accepted = [], []
    best = (R, t)

    def evaluate(R, t):
        moved = source @ R.T + t
        dist, rows = local_map.nearest_neighbors(moved, config.max_correspondence_distance)
        ok = rows >= 0
        n = int(ok.sum())
        if n < MIN_CORRESPONDENCES:
            raise RegistrationError(f"only {n} correspondences found (need {MIN_CORRESPONDENCES})")
        residual = float(dist[ok].mean())
        residuals.append(residual)
        if not accepted or residual <= accepted[-1]:
            accepted.append(residual)
            nonlocal best
            best = (R, t)
        return moved[ok], dist[ok], rows[ok]

    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        moved, dist, rows = evaluate(R, t)
        targets = local_map.points.positions[rows]
        weights = 1.0 / (1.0 + (dist / config.robust_kernel_scale) ** 2)
        dR, dt = _weighted_kabsch(moved, targets, weights)
        R = orthonormalize(dR @ R)
        t = dR @ t + dt
        step = np.linalg.norm(dt) + np.linalg.norm(Rotation.from_matrix(orthonormalize(dR)).as_rotvec())
        if step < config.convergence_threshold:
            converged = True
            break
    evaluate(R, t)
    if not converged:
        logger.debug("ICP stopped after %d iterations without converging", it)
    return IcpResult(Pose(*best), it, converged, residuals, accepted)


def register(scan: PointCloud, local_map: LocalMap, state: OdometryState, config: OdometryConfig | None = None) -> Pose:
    """Estimate the sensor-to-map pose of ``scan``.

    On an empty map (first frame) this returns the identity pose.
    """
    config = config or OdometryConfig()
    if len(scan) == 0:
        raise ValueError("cannot register an empty scan")
    if local_map.empty():
        return Pose.identity()
    source = voxel_downsample(scan.positions, config.downsample_voxel_size)
    return icp(source, local_map, state.predict(), config).pose


def pass_through(poses, scan_index: int, extrinsic: Pose | None = None) -> Pose:
    """Look up an externally supplied pose, optionally composed as ``extrinsic ∘ pose``."""
    try:
        if scan_index < 0:
            raise IndexError(scan_index)
        pose = poses[scan_index]
    except (IndexError, KeyError):
        raise InputError(f"no pose entry for scan {scan_index}") from None
    if extrinsic is not None:
        pose = extrinsic @ pose
    return pose
