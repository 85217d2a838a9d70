import numpy as np
import pytest

from _support import run_scene
from mosbelief.belief import BeliefMap
from mosbelief.core import MovingLabel, PointCloud, RegistrationError
from mosbelief.metrics import compute_metrics
from mosbelief.pipeline import (
    ALL_STRATEGIES,
    Engine,
    EngineConfig,
    FusionStrategy,
    backtrace_moving_map_points,
    emit_static_points,
)
from mosbelief.predictor import FilePredictor, HeuristicPredictor, LogitStore, PredictionOutput
from mosbelief.synthetic import Box, SyntheticScene, crossing_pedestrian, generate_scene

F = FusionStrategy


def noisy_scene(duration=2.0):
    scene = crossing_pedestrian(seed=5, flip_rate=0.1)
    scene.duration = duration
    return scene


@pytest.fixture(scope="module")
def all_at_once():
    return run_scene(noisy_scene())


def test_strategies_are_independent(all_at_once):
    for strategy in ALL_STRATEGIES:
        alone = run_scene(noisy_scene(), EngineConfig(strategies=(strategy,)))
        assert alone.decisions[strategy].keys() == all_at_once.decisions[strategy].keys()
        for idx, labels in alone.decisions[strategy].items():
            assert labels.tobytes() == all_at_once.decisions[strategy][idx].tobytes()


def test_run_is_deterministic(all_at_once):
    again = run_scene(noisy_scene())
    for strategy in ALL_STRATEGIES:
        for idx, labels in again.decisions[strategy].items():
            assert labels.tobytes() == all_at_once.decisions[strategy][idx].tobytes()
    assert len(again.emitted) == len(all_at_once.emitted)
    for a, b in zip(again.emitted, all_at_once.emitted):
        assert a.positions.tobytes() == b.positions.tobytes()


def test_causality(all_at_once):
    cutoff, delay = 15, EngineConfig().delay_scans
    frames = list(generate_scene(noisy_scene()))
    rng = np.random.default_rng(0)
    records = {f.scan_index: f.logits if f.scan_index < cutoff else rng.normal(0, 5, len(f.logits)) for f in frames}
    engine = Engine(FilePredictor(LogitStore(records=records)))
    seen = {}
    for f in frames:
        for strategy, decision in engine.process_scan(f.scan, f.pose).decisions.items():
            if decision is not None:
                seen[(strategy, decision.scan_index)] = decision.labels
    for strategy in ALL_STRATEGIES:
        horizon = cutoff - 1 - (delay if strategy.delayed else 0)
        for idx in range(horizon + 1):
            assert seen[(strategy, idx)].tobytes() == all_at_once.decisions[strategy][idx].tobytes()


def test_oracle_logits_give_perfect_iou_when_movers_leave_their_voxels():
    walls = [Box((0.0, 16.0, 2.5), (40.0, 1.0, 5.0)), Box((20.0, 0.0, 2.5), (1.0, 32.0, 5.0))]
    # 0.5 m per scan, clear of the ground and the walls
    mover = Box((-8.0, -5.0, 1.5), (1.0, 1.0, 1.0), (5.0, 0.0, 0.0))
    run = run_scene(SyntheticScene(static_boxes=walls, actors=[mover], duration=3.0))
    assert run.counts[F.VOLUME_DELAYED].iou == 1.0
    assert len(run.decisions[F.VOLUME_DELAYED]) == 30


def test_delayed_answers_after_delay():
    frames = list(generate_scene(noisy_scene(1.5)))
    engine = Engine(FilePredictor(LogitStore(records={f.scan_index: f.logits for f in frames})))
    answered = []
    for f in frames:
        result = engine.process_scan(f.scan, f.pose)
        d = result.decisions[F.VOLUME_DELAYED]
        answered.append(None if d is None else d.scan_index)
        assert result.decisions[F.SCAN_ONLY].scan_index == f.scan_index
    assert answered[:10] == [None] * 10
    assert answered[10:] == list(range(len(frames) - 10))
    flushed = engine.flush()
    assert [r.scan_index for r in flushed] == list(range(len(frames) - 10, len(frames)))
    assert engine.flush() == []


def test_zero_delay_matches_no_delay():
    run = run_scene(noisy_scene(1.0), EngineConfig(delay_scans=0, strategies=(F.VOLUME_NO_DELAY, F.VOLUME_DELAYED)))
    for idx, labels in run.decisions[F.VOLUME_NO_DELAY].items():
        assert labels.tobytes() == run.decisions[F.VOLUME_DELAYED][idx].tobytes()


def test_scans_must_arrive_in_order():
    frames = list(generate_scene(noisy_scene(0.3)))
    engine = Engine(FilePredictor(LogitStore(records={f.scan_index: f.logits for f in frames})))
    engine.process_scan(frames[1].scan, frames[1].pose)
    with pytest.raises(ValueError, match="out of order"):
        engine.process_scan(frames[0].scan, frames[0].pose)
    with pytest.raises(ValueError):
        engine.process_scan(PointCloud.empty())


def test_icp_tracks_stationary_sensor():
    run = run_scene(crossing_pedestrian(), use_true_poses=False)
    for pose in run.poses:
        assert np.abs(pose.matrix() - np.eye(4)).max() < 1e-6
    assert run.counts[F.SCAN_ONLY].iou == 1.0


def test_registration_failure_propagates():
    engine = Engine(FilePredictor(LogitStore(records={0: np.zeros(20), 1: np.zeros(20)})))
    engine.process_scan(PointCloud.from_scan(np.random.default_rng(0).uniform(0, 1, (20, 3)), 0.0, 0))
    with pytest.raises(RegistrationError):
        engine.process_scan(PointCloud.from_scan(np.full((20, 3), 500.0) + np.arange(20)[:, None], 0.1, 1))


def test_heuristic_predictor_end_to_end():
    run = run_scene(noisy_scene(1.5), predictor=HeuristicPredictor())
    iou, _, _ = compute_metrics(
        np.concatenate(list(run.decisions[F.SCAN_ONLY].values())), np.concatenate(list(run.labels.values()))
    )
    assert 0.0 <= iou <= 1.0
    for per_scan in run.decisions.values():
        assert all(set(np.unique(v)) <= {0, 1} for v in per_scan.values())


def test_backtrace_selects_positive_map_points():
    pts = PointCloud.from_scan(np.arange(12.0).reshape(4, 3), 0.0, 0)
    chosen, logits = backtrace_moving_map_points(pts, PredictionOutput(np.zeros(0), np.array([-1.0, 0.0, 0.5, 3.0])))
    assert chosen.ordinals.tolist() == [2, 3]
    assert logits.tolist() == [0.5, 3.0]
    chosen, _ = backtrace_moving_map_points(pts, PredictionOutput(np.zeros(0), np.array([-1.0, 0.0, 0.5, 3.0])), 1.0)
    assert chosen.ordinals.tolist() == [3]


def test_emission_needs_both_static():
    belief = BeliefMap()
    belief.set_value((0, 0, 0), 2.0)
    pts = PointCloud.from_scan(np.array([[0.1, 0.1, 0.1], [0.1, 0.1, 0.1], [5.0, 5, 5], [5.0, 5, 5]]), 0.0, 0)
    out = emit_static_points(pts, belief, [-1.0, -1.0, -1.0, 1.0])
    assert out.ordinals.tolist() == [2]


def test_emitted_only_with_delayed_strategy():
    run = run_scene(noisy_scene(1.5), EngineConfig(strategies=(F.SCAN_ONLY, F.VOLUME_NO_DELAY)))
    assert run.emitted == []


def test_config_validation():
    with pytest.raises(ValueError):
        EngineConfig(delay_scans=-1)
    with pytest.raises(ValueError):
        EngineConfig(strategies=("bogus",))
    assert EngineConfig(strategies=("scan",)).strategies == (F.SCAN_ONLY,)
