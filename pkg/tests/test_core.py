import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mosbelief.core import (
    MovingLabel,
    PointCloud,
    Pose,
    TimedPoint,
    VoxelIndex,
    check_logits,
    logodds_to_prob,
    pack_indices,
    prob_to_logodds,
    unpack_keys,
    voxelize,
    voxelize_array,
)

coords = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
sizes = st.sampled_from([0.1, 0.25, 0.5, 1.0, 2.0])


def random_pose(rng, max_t=5.0, max_angle=math.pi):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return Pose.from_rotvec(axis * rng.uniform(0, max_angle), rng.uniform(-max_t, max_t, 3))


class TestProbability:
    @given(st.floats(1e-6, 1 - 1e-6))
    def test_round_trip(self, p):
        assert abs(logodds_to_prob(prob_to_logodds(p)) - p) <= 1e-12

    def test_extremes_do_not_overflow(self):
        with np.errstate(over="raise", invalid="raise"):
            assert logodds_to_prob(1e4) == 1.0
            assert logodds_to_prob(-1e4) == 0.0

    def test_zero_is_half(self):
        assert logodds_to_prob(0.0) == 0.5

    @given(st.floats(-50, 50, allow_nan=False))
    def test_sign_consistency(self, l):
        p = logodds_to_prob(l)
        assert (p > 0.5) == (l > 0)
        assert (p < 0.5) == (l < 0)

    def test_vectorised(self):
        out = logodds_to_prob(np.array([-1.0, 0.0, 1e-12]))
        assert out.shape == (3,)
        assert out[2] > 0.5


class TestVoxelize:
    def test_floor_convention(self):
        assert voxelize((0.0, 0.24, 0.25), 0.25) == VoxelIndex(0, 0, 1)
        assert voxelize((-0.01, -0.25, -0.26), 0.25) == VoxelIndex(-1, -1, -2)

    @pytest.mark.parametrize("bad", [(math.nan, 0, 0), (0, math.inf, 0), (0, 0, -math.inf)])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(ValueError):
            voxelize(bad, 0.5)
        with pytest.raises(ValueError):
            voxelize_array(np.array([bad]), 0.5)

    @pytest.mark.parametrize("size", [0.0, -1.0])
    def test_bad_size(self, size):
        with pytest.raises(ValueError):
            voxelize((0, 0, 0), size)

    @given(st.tuples(coords, coords, coords), sizes, st.integers(0, 2))
    def test_translation_consistency(self, p, size, axis):
        idx = voxelize(p, size)
        frac = np.asarray(p) / size - np.asarray(idx)
        # skip points sitting on (or within rounding of) a cell boundary
        if np.any(np.minimum(frac, 1 - frac) < 1e-6):
            return
        q = list(p)
        q[axis] += size
        shifted = voxelize(q, size)
        expected = list(idx)
        expected[axis] += 1
        assert tuple(shifted) == tuple(expected)

    @given(st.lists(st.tuples(coords, coords, coords), min_size=1, max_size=50), sizes)
    def test_array_matches_scalar(self, pts, size):
        arr = voxelize_array(np.array(pts), size)
        assert [tuple(r) for r in arr.tolist()] == [tuple(voxelize(p, size)) for p in pts]


class TestKeys:
    @given(st.lists(st.tuples(*[st.integers(-(2**20), 2**20 - 1)] * 3), min_size=1, max_size=100))
    def test_pack_round_trip_and_order(self, idx):
        idx = np.array(idx, dtype=np.int64)
        keys = pack_indices(idx)
        np.testing.assert_array_equal(unpack_keys(keys), idx)
        order = np.argsort(keys, kind="stable")
        lex = np.lexsort((idx[:, 2], idx[:, 1], idx[:, 0]))
        np.testing.assert_array_equal(idx[order], idx[lex])

    def test_out_of_grid(self):
        with pytest.raises(ValueError):
            pack_indices(np.array([[2**20, 0, 0]]))


class TestPose:
    def test_rejects_non_rotation(self):
        with pytest.raises(ValueError):
            Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
        with pytest.raises(ValueError):
            Pose(2 * np.eye(3), np.zeros(3))
        with pytest.raises(ValueError):
            Pose(np.eye(3), (0, math.nan, 0))

    def test_from_matrix_shapes(self):
        m = np.eye(4)
        m[:3, 3] = (1, 2, 3)
        assert np.allclose(Pose.from_matrix(m).translation, (1, 2, 3))
        assert np.allclose(Pose.from_matrix(m[:3]).matrix(), m)
        with pytest.raises(ValueError):
            Pose.from_matrix(np.eye(3))

    @given(st.integers(0, 2**32 - 1))
    def test_group_laws(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (random_pose(rng) for _ in range(3))
        pts = rng.normal(size=(10, 3))
        np.testing.assert_allclose((a @ b).apply(pts), a.apply(b.apply(pts)), atol=1e-9)
        np.testing.assert_allclose(((a @ b) @ c).matrix(), (a @ (b @ c)).matrix(), atol=1e-9)
        np.testing.assert_allclose((a @ a.inverse()).matrix(), np.eye(4), atol=1e-9)

    def test_long_composition_stays_valid(self):
        rng = np.random.default_rng(0)
        step = random_pose(rng, 0.1, 0.05)
        pose = Pose.identity()
        for _ in range(5000):
            pose = (pose @ step).normalized()
        R = pose.rotation
        assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-9

    def test_immutable(self):
        pose = Pose.identity()
        with pytest.raises(ValueError):
            pose.translation[0] = 1.0


class TestPointCloud:
    def test_from_scan_provenance(self):
        cloud = PointCloud.from_scan(np.arange(9.0).reshape(3, 3), 1.5, 7)
        assert len(cloud) == 3
        assert cloud[2] == TimedPoint((6.0, 7.0, 8.0), 1.5, 7, 2)
        sub = cloud[np.array([False, True, True])]
        assert sub.ordinals.tolist() == [1, 2]

    def test_points_round_trip(self):
        cloud = PointCloud.from_scan(np.random.default_rng(1).normal(size=(5, 3)), 0.2, 3)
        again = PointCloud.from_points(list(cloud))
        np.testing.assert_array_equal(again.positions, cloud.positions)
        np.testing.assert_array_equal(again.ordinals, cloud.ordinals)

    def test_transformed_keeps_metadata(self):
        cloud = PointCloud.from_scan(np.ones((4, 3)), 0.3, 2)
        moved = cloud.transformed(Pose(np.eye(3), (1, 0, 0)))
        assert moved.positions[0].tolist() == [2.0, 1.0, 1.0]
        np.testing.assert_array_equal(moved.timestamps, cloud.timestamps)

    def test_concatenate_empty(self):
        assert len(PointCloud.concatenate([])) == 0
        assert len(PointCloud.concatenate([PointCloud.empty(), PointCloud.from_scan(np.ones((2, 3)), 0, 0)])) == 2


def test_check_logits():
    assert check_logits([1, 2], 2).dtype == np.float64
    with pytest.raises(ValueError):
        check_logits([1.0, math.nan])
    with pytest.raises(ValueError):
        check_logits([1.0], 2)


def test_label_values():
    assert [int(m) for m in MovingLabel] == [0, 1, 2]
