"""Synthetic dynamic scenes with ground truth.

A ring-pattern LiDAR is ray cast against a ground plane and axis-aligned
boxes. Boxes with a nonzero velocity are moving actors; their points are
labeled moving. Each frame also carries oracle logits (``+max_logit`` on
movers, ``-max_logit`` elsewhere), optionally with a fraction of them
sign-flipped to emulate a noisy segmentation network.

Actor trajectories depend only on the scene description; the seed only
drives range noise and logit flips.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .core import MovingLabel, PointCloud, Pose
from . import formats
from .predictor import write_logits


@dataclass
class Box:
    center: tuple[float, float, float]
    size: tuple[float, float, float]
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    semantic_id: int | None = None

    @property
    def moving(self) -> bool:
        return any(v != 0.0 for v in self.velocity)

    def bounds(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=np.float64) + t * np.asarray(self.velocity, dtype=np.float64)
        half = 0.5 * np.asarray(self.size, dtype=np.float64)
        return c - half, c + half


@dataclass
class SensorModel:
    horizontal_rays: int = 360
    vertical_rays: int = 32
    vertical_fov: tuple[float, float] = (-25.0, 3.0)  # degrees
    rate_hz: float = 10.0
    noise_sigma: float = 0.01  # m, along the ray
    max_range: float = 40.0
    height: float = 1.8

    def directions(self) -> np.ndarray:
        az = np.linspace(-np.pi, np.pi, self.horizontal_rays, endpoint=False)
        el = np.radians(np.linspace(self.vertical_fov[0], self.vertical_fov[1], self.vertical_rays))
        el, az = np.meshgrid(el, az, indexing="ij")
        return np.stack(
            [np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1
        ).reshape(-1, 3)


@dataclass
class SyntheticScene:
    static_boxes: list[Box] = field(default_factory=list)
    actors: list[Box] = field(default_factory=list)
    sensor: SensorModel = field(default_factory=SensorModel)
    duration: float = 5.0  # s
    seed: int = 0
    sensor_start: tuple[float, float] = (0.0, 0.0)
    sensor_velocity: tuple[float, float] = (0.0, 0.0)
    ground: bool = True
    flip_rate: float = 0.0
    max_logit: float = 6.0

    @property
    def num_scans(self) -> int:
        return int(round(self.duration * self.sensor.rate_hz))

    def sensor_pose(self, t: float) -> Pose:
        x = self.sensor_start[0] + t * self.sensor_velocity[0]
        y = self.sensor_start[1] + t * self.sensor_velocity[1]
        return Pose(np.eye(3), (x, y, self.sensor.height))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> SyntheticScene:
        d = dict(d)
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown scene keys: {sorted(unknown)}")
        d["static_boxes"] = [Box(**b) for b in d.get("static_boxes", [])]
        d["actors"] = [Box(**b) for b in d.get("actors", [])]
        d["sensor"] = SensorModel(**d.get("sensor", {}))
        scene = cls(**d)
        scene.validate()
        return scene

    def validate(self):
        if self.duration <= 0 or self.sensor.rate_hz <= 0:
            raise ValueError("duration and sensor rate must be positive")
        if not 0.0 <= self.flip_rate <= 1.0:
            raise ValueError("flip_rate must be in [0, 1]")
        if self.sensor.horizontal_rays <= 0 or self.sensor.vertical_rays <= 0:
            raise ValueError("ray counts must be positive")
        for b in self.static_boxes + self.actors:
            if len(b.center) != 3 or len(b.size) != 3 or min(b.size) <= 0:
                raise ValueError(f"invalid box {b}")


@dataclass
class SyntheticFrame:
    scan_index: int
    timestamp: float
    scan: PointCloud  # sensor frame
    pose: Pose  # sensor to world
    labels: np.ndarray  # MovingLabel values
    logits: np.ndarray  # float32 oracle logits
    semantic_ids: np.ndarray  # SemanticKITTI-style class ids


def raycast(origin: np.ndarray, directions: np.ndarray, boxes: list[tuple[np.ndarray, np.ndarray]], ground: bool):
    """First hit distance along each ray and the index of the object hit.

    Object index ``-1`` is the ground plane ``z = 0``; ``-2`` means no hit
    (distance ``inf``). Box ``n`` has index ``n``.
    """
    n = len(directions)
    best = np.full(n, np.inf)
    hit = np.full(n, -2, dtype=np.int64)
    if ground:
        with np.errstate(divide="ignore"):
            t = np.where(directions[:, 2] < 0, -origin[2] / directions[:, 2], np.inf)
        best = np.where(t > 0, t, np.inf)
        hit[np.isfinite(best)] = -1
    d = np.where(np.abs(directions) < 1e-12, 1e-12, directions)
    for idx, (lo, hi) in enumerate(boxes):
        t0 = (lo - origin) / d
        t1 = (hi - origin) / d
        t_near = np.minimum(t0, t1).max(axis=1)
        t_far = np.maximum(t0, t1).min(axis=1)
        ok = (t_near <= t_far) & (t_near > 1e-6) & (t_near < best)
        best[ok] = t_near[ok]
        hit[ok] = idx
    return best, hit


def random_scan(scene: SyntheticScene, n_rays: int, rng: np.random.Generator, t: float = 0.0) -> np.ndarray:
    """Noiseless sensor-frame hits for ``n_rays`` random directions inside
    the vertical field of view. Free of the ring-pattern regularity, which
    makes it a clean registration target."""
    lo, hi = np.radians(scene.sensor.vertical_fov)
    el = np.arcsin(rng.uniform(np.sin(lo), np.sin(hi), n_rays))
    az = rng.uniform(-np.pi, np.pi, n_rays)
    directions = np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1)
    origin = scene.sensor_pose(t).translation
    boxes = [b.bounds(t) for b in scene.static_boxes + scene.actors]
    dist, _ = raycast(origin, directions, boxes, scene.ground)
    keep = np.isfinite(dist) & (dist <= scene.sensor.max_range)
    return directions[keep] * dist[keep, None]


def generate_scene(scene: SyntheticScene) -> Iterator[SyntheticFrame]:
    """Yield one frame per sensor period for the scene's duration."""
    scene.validate()
    rng = np.random.default_rng(scene.seed)
    directions = scene.sensor.directions()
    boxes = scene.static_boxes + scene.actors
    moving = np.array([b.moving for b in boxes], dtype=bool)
    default_ids = [50] * len(scene.static_boxes) + [252] * len(scene.actors)
    box_ids = np.array(
        [b.semantic_id if b.semantic_id is not None else default_ids[i] for i, b in enumerate(boxes)],
        dtype=np.uint32,
    )
    for k in range(scene.num_scans):
        t = k / scene.sensor.rate_hz
        pose = scene.sensor_pose(t)
        origin = pose.translation
        dist, obj = raycast(origin, directions, [b.bounds(t) for b in boxes], scene.ground)
        noisy = dist + rng.normal(0.0, scene.sensor.noise_sigma, len(dist))
        keep = np.isfinite(dist) & (dist <= scene.sensor.max_range)
        points = directions[keep] * noisy[keep, None]
        obj = obj[keep]

        labels = np.full(len(obj), MovingLabel.STATIC, dtype=np.uint8)
        semantic = np.full(len(obj), 40, dtype=np.uint32)  # road
        on_box = obj >= 0
        semantic[on_box] = box_ids[obj[on_box]]
        labels[on_box & moving[np.maximum(obj, 0)]] = MovingLabel.MOVING

        logits = np.where(labels == MovingLabel.MOVING, scene.max_logit, -scene.max_logit)
        flips = rng.random(len(logits)) < scene.flip_rate
        logits = np.where(flips, -logits, logits).astype(np.float32)
        yield SyntheticFrame(k, t, PointCloud.from_scan(points, t, k), pose, labels, logits, semantic)


def write_sequence(scene: SyntheticScene, out_dir) -> Path:
    """Write a KITTI-style sequence (scans, labels, poses, times, logits)."""
    out_dir = Path(out_dir)
    poses, times = [], []
    for frame in generate_scene(scene):
        formats.write_scan(formats.scan_path(out_dir, frame.scan_index), frame.scan.positions)
        formats.write_raw_labels(formats.label_path(out_dir, frame.scan_index), frame.semantic_ids)
        write_logits(out_dir / "logits" / f"{frame.scan_index:06d}.logits", frame.logits)
        poses.append(frame.pose)
        times.append(frame.timestamp)
    formats.write_poses(out_dir / "poses.txt", poses)
    formats.write_times(out_dir / "times.txt", times)
    return out_dir


def crossing_pedestrian(seed: int = 0, flip_rate: float = 0.0) -> SyntheticScene:
    """One pedestrian walking across in front of a parked car and two walls."""
    return SyntheticScene(
        static_boxes=[
            Box((0.0, 14.0, 2.0), (30.0, 1.0, 4.0)),
            Box((18.0, 0.0, 2.0), (1.0, 20.0, 4.0)),
            Box((9.0, -4.0, 0.75), (4.2, 1.8, 1.5), semantic_id=10),
        ],
        actors=[Box((6.0, -4.0, 0.9), (0.6, 0.6, 1.8), velocity=(0.0, 1.0, 0.0), semantic_id=254)],
        duration=5.0,
        seed=seed,
        flip_rate=flip_rate,
    )


BUNDLED_SCENES = {"crossing-pedestrian": crossing_pedestrian}


def benchmark_suite(flip_rate: float = 0.0) -> list[SyntheticScene]:
    """Five fixed scenes (seeds 0-4) mixing pedestrians and cars.

    Layouts are hand-written so that the suite does not change with numpy's
    random streams.
    """
    walls = [
        Box((0.0, 16.0, 2.5), (40.0, 1.0, 5.0)),
        Box((0.0, -16.0, 2.5), (40.0, 1.0, 5.0)),
        Box((20.0, 0.0, 2.5), (1.0, 32.0, 5.0)),
    ]
    layouts = [
        # crossing pedestrians, parked car
        dict(
            static_boxes=walls + [Box((8.0, 5.0, 0.75), (4.2, 1.8, 1.5))],
            actors=[
                Box((6.0, -5.0, 0.9), (0.6, 0.6, 1.8), (0.0, 1.2, 0.0), 254),
                Box((-7.0, 6.0, 0.9), (0.6, 0.6, 1.8), (0.8, -0.6, 0.0), 254),
            ],
        ),
        # oncoming car and a cyclist-sized box
        dict(
            static_boxes=walls + [Box((-10.0, -6.0, 1.0), (3.0, 3.0, 2.0))],
            actors=[
                Box((15.0, -3.0, 0.75), (4.2, 1.8, 1.5), (-5.0, 0.0, 0.0), 252),
                Box((-3.0, 8.0, 0.9), (1.8, 0.6, 1.6), (3.0, 0.0, 0.0), 253),
            ],
        ),
        # moving sensor, car overtaking in the next lane
        dict(
            static_boxes=walls + [Box((10.0, 6.0, 0.75), (4.2, 1.8, 1.5)), Box((-6.0, 6.0, 0.75), (4.2, 1.8, 1.5))],
            actors=[Box((-12.0, -3.5, 0.75), (4.2, 1.8, 1.5), (6.0, 0.0, 0.0), 252)],
            sensor_velocity=(2.0, 0.0),
            sensor_start=(-6.0, 0.0),
        ),
        # group of pedestrians walking together
        dict(
            static_boxes=walls,
            actors=[
                Box((-4.0, -8.0, 0.9), (0.6, 0.6, 1.8), (0.0, 1.4, 0.0), 254),
                Box((-3.0, -8.5, 0.85), (0.6, 0.6, 1.7), (0.0, 1.4, 0.0), 254),
                Box((5.0, 9.0, 0.9), (0.6, 0.6, 1.8), (-1.0, -0.3, 0.0), 254),
            ],
        ),
        # two cars crossing an intersection, moving sensor
        dict(
            static_boxes=walls + [Box((12.0, -8.0, 3.0), (6.0, 6.0, 6.0))],
            actors=[
                Box((6.0, -14.0, 0.75), (1.8, 4.2, 1.5), (0.0, 4.0, 0.0), 252),
                Box((-14.0, 4.0, 0.75), (4.2, 1.8, 1.5), (4.5, 0.0, 0.0), 252),
            ],
            sensor_velocity=(1.0, 0.0),
        ),
    ]
    return [SyntheticScene(seed=n, flip_rate=flip_rate, **layout) for n, layout in enumerate(layouts)]
