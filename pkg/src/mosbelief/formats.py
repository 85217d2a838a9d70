"""KITTI / SemanticKITTI style file formats.

Sequence layout used throughout::

    <sequence>/velodyne/000000.bin     float32 x, y, z, intensity
    <sequence>/labels/000000.label     uint32, lower 16 bits = semantic class
    <sequence>/logits/000000.logits    float32, one per point
    <sequence>/poses.txt               12 floats per line, row-major [R|t]
    <sequence>/times.txt               one timestamp (s) per line
    <sequence>/calib.txt               optional, ``Tr: <12 floats>``
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import InputError, MovingLabel, PointCloud, Pose

MOVING_CLASSES = frozenset(range(252, 260))
UNLABELED_CLASSES = frozenset({0, 1})

# label ids written when exporting decisions in .label form
STATIC_LABEL_ID = 9
MOVING_LABEL_ID = 251

# text poses carry ~7 significant digits
POSE_FILE_TOL = 1e-5


def scan_path(sequence_dir, scan_index: int) -> Path:
    return Path(sequence_dir) / "velodyne" / f"{scan_index:06d}.bin"


def label_path(sequence_dir, scan_index: int) -> Path:
    return Path(sequence_dir) / "labels" / f"{scan_index:06d}.label"


def load_scan(path, scan_index: int = 0, timestamp: float = 0.0) -> PointCloud:
    """Read a ``.bin`` scan; intensity is dropped."""
    raw = Path(path).read_bytes()
    if len(raw) % 16:
        raise InputError(f"{path}: truncated record at byte offset {len(raw) - len(raw) % 16}")
    xyzi = np.frombuffer(raw, dtype="<f4").reshape(-1, 4)
    return PointCloud.from_scan(xyzi[:, :3].astype(np.float64), timestamp, scan_index)


def write_scan(path, positions, intensity=None) -> None:
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    out = np.zeros((len(positions), 4), dtype="<f4")
    out[:, :3] = positions
    if intensity is not None:
        out[:, 3] = intensity
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    out.tofile(path)


def semantic_to_moving(
    semantic: np.ndarray, moving_classes=MOVING_CLASSES, unlabeled_classes=UNLABELED_CLASSES
) -> np.ndarray:
    semantic = np.asarray(semantic) & 0xFFFF
    out = np.full(semantic.shape, MovingLabel.STATIC, dtype=np.uint8)
    out[np.isin(semantic, list(moving_classes))] = MovingLabel.MOVING
    out[np.isin(semantic, list(unlabeled_classes))] = MovingLabel.UNLABELED
    return out


def load_labels(path, moving_classes=MOVING_CLASSES, unlabeled_classes=UNLABELED_CLASSES) -> np.ndarray:
    """Read a SemanticKITTI ``.label`` file as ``MovingLabel`` values (uint8)."""
    raw = Path(path).read_bytes()
    if len(raw) % 4:
        raise InputError(f"{path}: truncated record at byte offset {len(raw) - len(raw) % 4}")
    return semantic_to_moving(np.frombuffer(raw, dtype="<u4"), moving_classes, unlabeled_classes)


def write_labels(path, labels) -> None:
    """Write moving/static labels as SemanticKITTI class ids (9 / 251, 0 for unlabeled)."""
    labels = np.asarray(labels)
    ids = np.zeros(labels.shape, dtype="<u4")
    ids[labels == MovingLabel.STATIC] = STATIC_LABEL_ID
    ids[labels == MovingLabel.MOVING] = MOVING_LABEL_ID
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    ids.tofile(path)


def write_raw_labels(path, semantic_ids) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.asarray(semantic_ids, dtype="<u4").tofile(path)


def parse_pose_row(values) -> Pose:
    values = [float(v) for v in values]
    if len(values) != 12:
        raise InputError(f"pose row has {len(values)} values, expected 12")
    return Pose.from_matrix(np.array(values).reshape(3, 4), tol=POSE_FILE_TOL)


def load_poses(path) -> list[Pose]:
    poses = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            poses.append(parse_pose_row(line.split()))
        except ValueError as err:
            raise InputError(f"{path}:{lineno}: {err}") from None
    return poses


def format_pose(pose: Pose) -> str:
    return " ".join(f"{v:.9e}" for v in pose.matrix()[:3].reshape(-1))


def write_poses(path, poses) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("".join(format_pose(p) + "\n" for p in poses))


def load_calibration(path) -> Pose:
    """Read a single 3x4 extrinsic, either bare or as the ``Tr:`` entry of a KITTI calib file."""
    text = Path(path).read_text()
    rows = [line for line in text.splitlines() if line.strip()]
    tr = [line.split(":", 1)[1] for line in rows if line.strip().startswith("Tr:")]
    if tr:
        return parse_pose_row(tr[0].split())
    if len(rows) == 1 and ":" not in rows[0]:
        return parse_pose_row(rows[0].split())
    raise InputError(f"{path}: no 3x4 extrinsic found")


def load_times(path) -> np.ndarray:
    return np.loadtxt(path, dtype=np.float64, ndmin=1)


def write_times(path, times) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("".join(f"{t:.6f}\n" for t in times))


def list_scans(sequence_dir) -> list[int]:
    return sorted(int(p.stem) for p in (Path(sequence_dir) / "velodyne").glob("*.bin"))


def write_decisions(path, labels) -> None:
    """One byte per point: 0 static, 1 moving, 2 undecided."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.asarray(labels, dtype=np.uint8).tofile(path)


def read_decisions(path) -> np.ndarray:
    return np.fromfile(path, dtype=np.uint8)


def write_belief(path, belief, prune_below: float = 0.0) -> None:
    """Export a belief map as text: ``# voxel_size <s>`` header, then ``i j k log_odds`` rows.

    ``repr`` formatting round-trips every float exactly. Cells with
    ``|log_odds| < prune_below`` (near the prior) are left out.
    """
    indices, values = belief.cells()
    keep = np.abs(values) >= prune_below
    indices, values = indices[keep], values[keep]
    lines = [f"# voxel_size {belief.voxel_size!r}\n", "# i j k log_odds\n"]
    lines.extend(f"{i} {j} {k} {v!r}\n" for (i, j, k), v in zip(indices.tolist(), values.tolist()))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("".join(lines))


def read_belief(path, prune_below: float = 0.0):
    """Load a belief export; cells with ``|log_odds| < prune_below`` are dropped."""
    from .belief import BeliefMap

    voxel_size = None
    belief = None
    for line in Path(path).read_text().splitlines():
        if line.startswith("# voxel_size"):
            voxel_size = float(line.split()[2])
            belief = BeliefMap(voxel_size=voxel_size, logodds_clamp=None)
            continue
        if line.startswith("#") or not line.strip():
            continue
        if belief is None:
            raise InputError(f"{path}: missing voxel_size header")
        i, j, k, v = line.split()
        if abs(float(v)) >= prune_below:
            belief.set_value((int(i), int(j), int(k)), float(v))
    if belief is None:
        raise InputError(f"{path}: missing voxel_size header")
    return belief
