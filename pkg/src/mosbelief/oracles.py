"""Deliberately naive reference implementations used to check the fast paths.

Nothing here shares code with the belief map or local map beyond the plain
floor-division voxel convention.
"""

from __future__ import annotations

import math

import numpy as np

from .core import MovingLabel


def _voxel(p, voxel_size):
    return (math.floor(p[0] / voxel_size), math.floor(p[1] / voxel_size), math.floor(p[2] / voxel_size))


def group_by_voxel(positions, logits, voxel_size: float) -> dict[tuple[int, int, int], float]:
    """Mean logit per voxel, summing members in point order with plain Python floats."""
    sums: dict[tuple[int, int, int], float] = {}
    counts: dict[tuple[int, int, int], int] = {}
    for p, s in zip(np.asarray(positions, dtype=np.float64).tolist(), np.asarray(logits, dtype=np.float64).tolist()):
        key = _voxel(p, voxel_size)
        sums[key] = sums.get(key, 0.0) + s
        counts[key] = counts.get(key, 0) + 1
    return {k: sums[k] / counts[k] for k in sums}


def brute_force_belief(points_per_scan, logits_per_scan, voxel_size: float) -> dict[tuple[int, int, int], float]:
    """Unclamped belief with a 0.5 prior: materialise every per-scan voxel
    mean first, then sum them per voxel in one pass."""
    per_scan = [group_by_voxel(p, s, voxel_size) for p, s in zip(points_per_scan, logits_per_scan)]
    out: dict[tuple[int, int, int], float] = {}
    for means in per_scan:
        for key, m in means.items():
            out.setdefault(key, []).append(m)
    return {key: math.fsum(ms) for key, ms in out.items()}


def brute_force_nearest(points, q):
    """Index and distance of the closest of ``points`` to ``q`` (linear scan)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0:
        return None
    best, best_d = -1, math.inf
    for n, p in enumerate(points.tolist()):
        d = math.dist(p, q)
        if d < best_d:
            best, best_d = n, d
    return best, best_d


def count_confusion(pred, gt) -> tuple[int, int, int, int]:
    """(tp, fp, fn, tn) by walking the labels one at a time."""
    tp = fp = fn = tn = 0
    for p, g in zip(list(pred), list(gt)):
        if g == MovingLabel.UNLABELED:
            continue
        if p == MovingLabel.MOVING and g == MovingLabel.MOVING:
            tp += 1
        elif p == MovingLabel.MOVING:
            fp += 1
        elif g == MovingLabel.MOVING:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn
