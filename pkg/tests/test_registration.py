import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mosbelief.core import InputError, PointCloud, Pose, RegistrationError
from mosbelief.local_map import LocalMap
from mosbelief.registration import (
    OdometryConfig,
    OdometryState,
    icp,
    pass_through,
    register,
    voxel_downsample,
)
from mosbelief.synthetic import benchmark_suite, random_scan


@pytest.fixture(scope="module")
def static_scene():
    scene = benchmark_suite()[0]
    scene.actors = []
    return scene


def small_transform(rng, max_t=1.0, max_deg=5.0):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    return Pose.from_rotvec(axis * np.radians(rng.uniform(0, max_deg)), direction * rng.uniform(0, max_t))


def map_and_scan(scene, seed, n_rays=20000):
    rng = np.random.default_rng(seed)
    pts = random_scan(scene, n_rays, rng)
    truth = small_transform(rng)
    m = LocalMap()
    m.insert(PointCloud.from_scan(pts, 0.0, 0), truth)
    return m, pts, truth


def test_voxel_downsample_keeps_first_point():
    pts = np.array([[0.1, 0.1, 0.1], [0.2, 0.2, 0.2], [0.7, 0.1, 0.1], [0.3, 0.3, 0.3]])
    np.testing.assert_array_equal(voxel_downsample(pts, 0.5), pts[[0, 2]])


def test_constant_velocity_prediction():
    state = OdometryState()
    p1 = Pose.from_rotvec((0, 0, 0.1), (1.0, 0, 0))
    state.advance(p1)
    p2 = p1 @ Pose.from_rotvec((0, 0, 0.1), (1.0, 0, 0))
    state.advance(p2)
    expected = p2 @ Pose.from_rotvec((0, 0, 0.1), (1.0, 0, 0))
    np.testing.assert_allclose(state.predict().matrix(), expected.matrix(), atol=1e-12)


def test_recovers_transform(static_scene):
    m, pts, truth = map_and_scan(static_scene, 0)
    pose = register(PointCloud.from_scan(pts, 0.1, 1), m, OdometryState())
    assert np.linalg.norm(pose.translation - truth.translation) < 1e-3
    R = pose.rotation
    assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-9
    assert abs(np.linalg.det(R) - 1) < 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_residual_non_increasing(static_scene, seed):
    m, pts, _ = map_and_scan(static_scene, seed)
    result = icp(voxel_downsample(pts, 0.5), m, Pose.identity(), OdometryConfig())
    assert result.converged
    res = np.asarray(result.accepted_residuals)
    assert len(res) >= 2
    assert np.all(np.diff(res) <= 0.0), res


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_equivariance(static_scene, seed):
    rng = np.random.default_rng(seed)
    m, pts, _ = map_and_scan(static_scene, seed % 7, n_rays=8000)
    T = small_transform(rng, 10.0, 180.0)
    moved = LocalMap()
    moved.insert(m.points, T)
    seed_pose = small_transform(rng, 0.05, 0.5)
    scan = PointCloud.from_scan(pts, 0.1, 1)
    a = register(scan, m, OdometryState(seed_pose))
    b = register(scan, moved, OdometryState(T @ seed_pose))
    np.testing.assert_allclose(b.matrix(), (T @ a).matrix(), atol=1e-6)


def test_empty_map_gives_identity():
    pose = register(PointCloud.from_scan(np.ones((5, 3)), 0, 0), LocalMap(), OdometryState())
    np.testing.assert_array_equal(pose.matrix(), np.eye(4))


def test_too_few_correspondences():
    m = LocalMap()
    m.insert(PointCloud.from_scan(np.zeros((3, 3)), 0, 0))
    far = PointCloud.from_scan(np.full((50, 3), 100.0) + np.arange(50)[:, None], 0.1, 1)
    with pytest.raises(RegistrationError):
        register(far, m, OdometryState())


def test_empty_scan_rejected():
    with pytest.raises(ValueError):
        register(PointCloud.empty(), LocalMap(), OdometryState())


def test_pass_through():
    poses = [Pose.identity(), Pose(np.eye(3), (1, 2, 3))]
    extr = Pose(np.eye(3), (0, 0, 1))
    assert pass_through(poses, 1).translation.tolist() == [1, 2, 3]
    assert pass_through(poses, 1, extr).translation.tolist() == [1, 2, 4]
    for bad in (2, -1):
        with pytest.raises(InputError):
            pass_through(poses, bad)


def test_config_validation():
    with pytest.raises(ValueError):
        OdometryConfig(max_iterations=0)
