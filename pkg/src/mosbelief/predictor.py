"""Per-point moving-object logit sources.

The segmentation network is not part of this package. Logits come either
from per-scan files (any external model) or from a small geometric
heuristic that compares the scan against sufficiently old map points.
A predictor is any callable ``PredictionInput -> PredictionOutput``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .core import InputError, PointCloud, check_logits


@dataclass
class PredictionInput:
    scan_points: PointCloud
    map_points: PointCloud
    current_time: float


@dataclass
class PredictionOutput:
    scan_logits: np.ndarray
    map_logits: np.ndarray


def normalize_timestamps(timestamps) -> np.ndarray:
    """Affinely map timestamps to [0, 1] using their min and max.

    Accepts a ``PointCloud`` or an array of timestamps. If all timestamps
    are equal the result is all zeros.
    """
    if isinstance(timestamps, PointCloud):
        timestamps = timestamps.timestamps
    t = np.asarray(timestamps, dtype=np.float64).reshape(-1)
    if len(t) == 0:
        raise ValueError("cannot normalize an empty set of timestamps")
    lo, hi = t.min(), t.max()
    if hi == lo:
        return np.zeros_like(t)
    return (t - lo) / (hi - lo)


def logit_path(directory, scan_index: int) -> Path:
    return Path(directory) / f"{scan_index:06d}.logits"


def read_logits(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) % 4:
        raise InputError(f"{path}: length {len(raw)} is not a multiple of 4 bytes")
    return np.frombuffer(raw, dtype="<f4").copy()


def write_logits(path, logits) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.asarray(logits, dtype="<f4").tofile(path)


class LogitStore:
    """Per-scan logit records, loaded lazily from ``<scan_index:06>.logits`` files.

    Records can also be supplied in memory (``LogitStore(records={...})``),
    which is what tests and the synthetic pipeline use.
    """

    def __init__(self, directory=None, records: dict[int, np.ndarray] | None = None):
        self.directory = Path(directory) if directory is not None else None
        self._records = {int(k): np.asarray(v, dtype=np.float32) for k, v in (records or {}).items()}
        self._cache: dict[int, np.ndarray] = {}

    def __contains__(self, scan_index: int) -> bool:
        if scan_index in self._records or scan_index in self._cache:
            return True
        return self.directory is not None and logit_path(self.directory, scan_index).exists()

    def scan(self, scan_index: int) -> np.ndarray:
        scan_index = int(scan_index)
        if scan_index in self._records:
            return self._records[scan_index]
        if scan_index not in self._cache:
            path = logit_path(self.directory, scan_index) if self.directory is not None else None
            if path is None or not path.exists():
                raise InputError(f"missing logit record for scan {scan_index}")
            self._cache[scan_index] = read_logits(path)
        return self._cache[scan_index]

    def lookup(self, scan_indices: np.ndarray, ordinals: np.ndarray) -> np.ndarray:
        """Logits for points identified by (scan index, ordinal) provenance."""
        scan_indices = np.asarray(scan_indices, dtype=np.int64)
        ordinals = np.asarray(ordinals, dtype=np.int64)
        out = np.empty(len(scan_indices), dtype=np.float64)
        order = np.argsort(scan_indices, kind="stable")
        uniq, starts = np.unique(scan_indices[order], return_index=True)
        bounds = np.append(starts, len(order))
        for n, idx in enumerate(uniq.tolist()):
            rows = order[bounds[n] : bounds[n + 1]]
            values = self.scan(idx)
            ords = ordinals[rows]
            if ords.min() < 0 or ords.max() >= len(values):
                raise InputError(
                    f"logit record for scan {idx} has {len(values)} entries, ordinal {ords.max()} requested"
                )
            out[rows] = values[ords]
        return out

    def retain(self, scan_indices) -> None:
        """Evict file-backed records not in ``scan_indices`` from the cache."""
        keep = set(int(i) for i in scan_indices)
        for idx in [i for i in self._cache if i not in keep]:
            del self._cache[idx]


def predict_from_file(inp: PredictionInput, store: LogitStore) -> PredictionOutput:
    scan_logits = store.lookup(inp.scan_points.scan_indices, inp.scan_points.ordinals)
    map_logits = store.lookup(inp.map_points.scan_indices, inp.map_points.ordinals)
    store.retain(np.union1d(inp.scan_points.scan_indices, inp.map_points.scan_indices))
    return PredictionOutput(
        check_logits(scan_logits, len(inp.scan_points)), check_logits(map_logits, len(inp.map_points))
    )


@dataclass
class HeuristicConfig:
    gain: float = 4.0  # logit per meter
    offset: float = 0.3  # m; distance that maps to logit 0
    max_logit: float = 6.0
    min_age: float = 0.3  # s
    max_distance: float = 2.0  # m; distance assumed when no old neighbour exists


def predict_heuristic(inp: PredictionInput, cfg: HeuristicConfig | None = None) -> PredictionOutput:
    """Distance-to-old-map heuristic.

    A scan point far from every map point older than ``min_age`` seconds is
    likely on something that moved in. Map points are always reported static.
    """
    cfg = cfg or HeuristicConfig()
    scan = inp.scan_points
    old = inp.map_points.timestamps <= inp.current_time - cfg.min_age
    d = np.full(len(scan), cfg.max_distance)
    if len(scan) and old.any():
        dist, _ = cKDTree(inp.map_points.positions[old]).query(
            scan.positions, k=1, distance_upper_bound=cfg.max_distance
        )
        d = np.minimum(dist, cfg.max_distance)
    scan_logits = np.clip(cfg.gain * (d - cfg.offset), -cfg.max_logit, cfg.max_logit)
    map_logits = np.full(len(inp.map_points), -cfg.max_logit)
    return PredictionOutput(scan_logits, map_logits)


class FilePredictor:
    def __init__(self, store: LogitStore):
        self.store = store

    def __call__(self, inp: PredictionInput) -> PredictionOutput:
        return predict_from_file(inp, self.store)


class HeuristicPredictor:
    def __init__(self, cfg: HeuristicConfig | None = None):
        self.cfg = cfg or HeuristicConfig()

    def __call__(self, inp: PredictionInput) -> PredictionOutput:
        return predict_heuristic(inp, self.cfg)
