import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mosbelief.core import MovingLabel
from mosbelief.metrics import ConfusionCounts, compute_metrics, confusion
from mosbelief.oracles import count_confusion

M, S, U = MovingLabel.MOVING, MovingLabel.STATIC, MovingLabel.UNLABELED


def fixture(tp, fp, fn, tn=0):
    pred = [M] * tp + [M] * fp + [S] * fn + [S] * tn
    gt = [M] * tp + [S] * fp + [M] * fn + [S] * tn
    return np.array(pred, np.uint8), np.array(gt, np.uint8)


def test_eight_one_one():
    iou, p, r = compute_metrics(*fixture(8, 1, 1, 5))
    assert f"{iou:.6f}" == "0.800000"
    assert p == 8 / 9 and r == 8 / 9


def test_perfect_and_all_static():
    pred, gt = fixture(5, 0, 0, 5)
    assert compute_metrics(pred, gt) == (1.0, 1.0, 1.0)
    iou, p, r = compute_metrics(np.full(10, S, np.uint8), gt)
    assert iou == 0.0 and r == 0.0 and math.isnan(p)


def test_undefined_is_nan():
    iou, p, r = compute_metrics(np.full(4, S, np.uint8), np.full(4, S, np.uint8))
    assert math.isnan(iou) and math.isnan(p) and math.isnan(r)


def test_unlabeled_skipped():
    c = confusion(np.array([M, M, S], np.uint8), np.array([U, M, U], np.uint8))
    assert (c.tp, c.fp, c.fn, c.tn) == (1, 0, 0, 0)
    assert c.total == 1


def test_length_mismatch():
    with pytest.raises(ValueError):
        compute_metrics(np.zeros(3, np.uint8), np.zeros(4, np.uint8))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_counting_oracle(seed):
    rng = np.random.default_rng(seed)
    pred = rng.integers(0, 2, 10_000).astype(np.uint8)
    gt = rng.integers(0, 3, 10_000).astype(np.uint8)
    c = confusion(pred, gt)
    assert (c.tp, c.fp, c.fn, c.tn) == count_confusion(pred, gt)
    perm = rng.permutation(10_000)
    assert confusion(pred[perm], gt[perm]) == c


def test_counts_accumulate():
    a = ConfusionCounts(1, 2, 3, 4)
    assert a + a == ConfusionCounts(2, 4, 6, 8)
    assert ConfusionCounts(8, 1, 1, 0).iou == 0.8
