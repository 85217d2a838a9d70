"""Per-scan orchestration: register, predict, fuse and decide.

Four output strategies are supported and can run side by side, each with its
own belief map:

``scan``
    a point is moving iff its scan logit is positive (no fusion).
``volume_scan_only``
    scan logits are fused into the belief, the current scan is queried.
``volume_no_delay``
    scan logits and the logits of map points predicted moving are fused,
    the current scan is queried.
``volume``
    like ``volume_no_delay`` but the query for scan ``t`` is answered only
    after ``delay_scans`` further scans have been fused.
"""

from __future__ import annotations

import enum
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .belief import BeliefMap
from .core import MovingLabel, PointCloud, Pose, check_logits
from .local_map import LocalMap
from .predictor import PredictionInput, PredictionOutput
from .registration import OdometryConfig, OdometryState, register


class FusionStrategy(enum.Enum):
    SCAN_ONLY = "scan"
    VOLUME_SCAN_ONLY = "volume_scan_only"
    VOLUME_NO_DELAY = "volume_no_delay"
    VOLUME_DELAYED = "volume"

    @property
    def fuses(self) -> bool:
        return self is not FusionStrategy.SCAN_ONLY

    @property
    def fuses_map(self) -> bool:
        return self in (FusionStrategy.VOLUME_NO_DELAY, FusionStrategy.VOLUME_DELAYED)

    @property
    def delayed(self) -> bool:
        return self is FusionStrategy.VOLUME_DELAYED


ALL_STRATEGIES = tuple(FusionStrategy)


@dataclass
class EngineConfig:
    odometry: OdometryConfig = field(default_factory=OdometryConfig)
    local_map_voxel_size: float = 0.5
    max_points_per_voxel: int = 20
    local_map_max_range: float = 100.0
    belief_voxel_size: float = 0.25
    belief_clip_range: float = 150.0
    logodds_clamp: float | None = 8.0
    delay_scans: int = 10
    # map points with a logit above this are fused as moving
    map_logit_threshold: float = 0.0
    strategies: tuple[FusionStrategy, ...] = ALL_STRATEGIES

    def __post_init__(self):
        self.strategies = tuple(FusionStrategy(s) for s in self.strategies)
        if self.delay_scans < 0:
            raise ValueError("delay_scans must be non-negative")

    def new_belief(self) -> BeliefMap:
        return BeliefMap(self.belief_voxel_size, 0.0, self.belief_clip_range, self.logodds_clamp)


@dataclass
class Decision:
    scan_index: int
    labels: np.ndarray  # uint8 MovingLabel values, one per scan point


@dataclass
class FrameResult:
    scan_index: int
    pose: Pose | None  # None for results produced by Engine.flush
    # None for the delayed strategy until enough scans have been fused
    decisions: dict[FusionStrategy, Decision | None]
    emitted_static_points: PointCloud | None = None
    emitted_scan_index: int | None = None


@dataclass
class _Pending:
    scan_index: int
    points: PointCloud  # map frame
    scan_logits: np.ndarray


def backtrace_moving_map_points(
    map_points: PointCloud, prediction: PredictionOutput, threshold: float = 0.0
) -> tuple[PointCloud, np.ndarray]:
    """Map points whose logit is strictly above ``threshold``, with their logits."""
    logits = check_logits(prediction.map_logits, len(map_points))
    moving = logits > threshold
    return map_points[moving], logits[moving]


def emit_static_points(points: PointCloud, belief: BeliefMap, scan_logits) -> PointCloud:
    """Points that both the belief and their own scan logit consider static."""
    scan_logits = check_logits(scan_logits, len(points))
    keep = (belief.query(points) == MovingLabel.STATIC) & (scan_logits <= 0.0)
    return points[keep]


def scan_decision(scan_logits) -> np.ndarray:
    return np.where(np.asarray(scan_logits) > 0.0, MovingLabel.MOVING, MovingLabel.STATIC).astype(np.uint8)


@dataclass
class Timings:
    scans: int = 0
    registration: float = 0.0
    prediction: float = 0.0
    belief: float = 0.0

    def rates(self) -> dict[str, float]:
        def hz(seconds):
            return self.scans / seconds if seconds > 0 else float("inf")

        return {
            "scans": self.scans,
            "registration_hz": hz(self.registration),
            "prediction_hz": hz(self.prediction),
            "belief_hz": hz(self.belief),
        }


class Engine:
    """Online moving-object segmentation with volumetric belief fusion.

    Args:
        predictor: callable mapping a :class:`PredictionInput` to logits.
        config: engine configuration.
    """

    def __init__(self, predictor: Callable[[PredictionInput], PredictionOutput], config: EngineConfig | None = None):
        self.config = config or EngineConfig()
        self.predictor = predictor
        self.local_map = LocalMap(
            self.config.local_map_voxel_size, self.config.max_points_per_voxel, self.config.local_map_max_range
        )
        self.odometry = OdometryState()
        self.beliefs = {s: self.config.new_belief() for s in self.config.strategies if s.fuses}
        self._pending: deque[_Pending] = deque()
        self.timings = Timings()
        self._last_index: int | None = None
        self._last_time = -np.inf

    def process_scan(self, scan: PointCloud, pose: Pose | None = None) -> FrameResult:
        """Process one sensor-frame scan.

        If ``pose`` is given it is used verbatim; otherwise the scan is
        registered against the local map. Scans must arrive in order.
        """
        if len(scan) == 0:
            raise ValueError("empty scan")
        scan_index = int(scan.scan_indices[0])
        current_time = float(scan.timestamps.max())
        if self._last_index is not None and (scan_index <= self._last_index or current_time < self._last_time):
            raise ValueError(f"scan {scan_index} arrived out of order")

        t0 = time.perf_counter()
        if pose is None:
            pose = register(scan, self.local_map, self.odometry, self.config.odometry)
        self.odometry.advance(pose)
        points = scan.transformed(pose)
        t1 = time.perf_counter()

        # predict against strictly past data: the scan enters the map afterwards
        map_points = self.local_map.snapshot_points()
        prediction = self.predictor(PredictionInput(points, map_points, current_time))
        scan_logits = check_logits(prediction.scan_logits, len(points))
        t2 = time.perf_counter()

        origin = pose.translation
        decisions: dict[FusionStrategy, Decision | None] = {}
        if any(s.fuses_map for s in self.beliefs):
            moving_map, moving_logits = backtrace_moving_map_points(
                map_points, prediction, self.config.map_logit_threshold
            )
            fused_points = PointCloud.concatenate([points, moving_map])
            fused_logits = np.concatenate([scan_logits, moving_logits])
        for strategy in self.config.strategies:
            if strategy is FusionStrategy.SCAN_ONLY:
                decisions[strategy] = Decision(scan_index, scan_decision(scan_logits))
                continue
            belief = self.beliefs[strategy]
            if strategy.fuses_map:
                belief.integrate(fused_points, fused_logits, origin)
            else:
                belief.integrate(points, scan_logits, origin)
            if not strategy.delayed:
                decisions[strategy] = Decision(scan_index, belief.query(points))

        emitted = emitted_index = None
        if FusionStrategy.VOLUME_DELAYED in self.beliefs:
            self._pending.append(_Pending(scan_index, points, scan_logits))
            decisions[FusionStrategy.VOLUME_DELAYED] = None
            if len(self._pending) > self.config.delay_scans:
                decision, emitted = self._answer(self._pending.popleft())
                decisions[FusionStrategy.VOLUME_DELAYED] = decision
                emitted_index = decision.scan_index
        t3 = time.perf_counter()

        self.local_map.insert(points)
        self.local_map.prune(origin)

        self.timings.scans += 1
        self.timings.registration += t1 - t0
        self.timings.prediction += t2 - t1
        self.timings.belief += t3 - t2
        self._last_index = scan_index
        self._last_time = current_time
        return FrameResult(scan_index, pose, decisions, emitted, emitted_index)

    def _answer(self, pending: _Pending) -> tuple[Decision, PointCloud]:
        belief = self.beliefs[FusionStrategy.VOLUME_DELAYED]
        decision = Decision(pending.scan_index, belief.query(pending.points))
        return decision, emit_static_points(pending.points, belief, pending.scan_logits)

    def flush(self) -> list[FrameResult]:
        """Answer the delayed queries still pending at the end of a sequence,
        using the belief as it stands (no further scans are fused)."""
        out = []
        while self._pending:
            pending = self._pending.popleft()
            decision, emitted = self._answer(pending)
            out.append(
                FrameResult(
                    pending.scan_index,
                    None,
                    {FusionStrategy.VOLUME_DELAYED: decision},
                    emitted,
                    pending.scan_index,
                )
            )
        return out
