import copy
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.append(str(project_root))

from src.config.run_config import EnvConfig, MapConfig, TrafficConfig
from src.driving_sim.environment import wrap_angle
from src.driving_sim.road_map import build_map
from src.evaluation.evaluator import (
    TRAJECTORY_COLUMNS,
    PolicyEvaluator,
    format_comparison_table,
    summarize_records,
    write_summaries,
)
from src.nn_core.mlp import init_mlp, params_equal

EMPTY_TRAFFIC = TrafficConfig(density=0.0, accident_prob=0.0)


def lane_keeper(observation, env):
    """Centerline-following controller at 8 m/s"""
    world = env.world
    _, _, tangent = env.road_map.point_at(world.progress)
    heading_error = wrap_angle(world.heading - float(tangent))
    steer = np.clip(-(1.5 * heading_error + 0.5 * world.lateral) / 0.6, -1.0, 1.0)
    return np.array([steer, np.clip((8.0 - world.speed) / 3.0, -1.0, 1.0)])


def swerve_left(observation, env):
    return np.array([1.0, 1.0])


@pytest.fixture
def empty_evaluator():
    """Create an evaluator on an obstacle-free straight"""
    return PolicyEvaluator([build_map(MapConfig(layout="S200"), seed=0)], EnvConfig(), EMPTY_TRAFFIC)


def test_scripted_controller_always_succeeds(empty_evaluator):
    """Test success rate 1 and zero cost on an empty road"""
    summary = empty_evaluator.evaluate(lane_keeper, group_size=3, repeats=2, seed=1)
    assert summary.success_rate_mean == 1.0
    assert summary.success_rate_std == 0.0
    assert summary.episode_cost_mean == 0.0
    assert summary.feasible_rate_mean == 1.0
    assert len(summary.records) == 6


def test_departing_controller_never_succeeds(empty_evaluator):
    """Test a policy that leaves the road at once"""
    summary = empty_evaluator.evaluate(swerve_left, group_size=4, repeats=2, seed=1)
    assert summary.success_rate_mean == 0.0
    assert (summary.records["cost"] >= 1).all()
    assert (summary.records["status"] == "lane-departure").all()
    assert summary.feasible_rate_mean < 1.0


def test_std_is_over_group_means():
    """Test aggregation over repeats: mean and population std of the group means"""
    records = pd.DataFrame({
        "repeat": [0, 0, 0, 0, 1, 1, 1, 1],
        "success": [True, True, False, False, True, True, True, True],
        "cost": [0, 0, 2, 2, 0, 0, 0, 0],
        "reward": [10.0, 10.0, -5.0, -5.0, 10.0, 10.0, 10.0, 10.0],
        "steps": [100, 100, 50, 50, 100, 100, 100, 100],
        "feasible_steps": [100, 100, 48, 48, 100, 100, 100, 100],
    })
    summary = summarize_records(records, group_size=4, repeats=2)
    assert summary.success_rate_mean == pytest.approx(0.75)
    assert summary.success_rate_std == pytest.approx(0.25)
    assert summary.episode_cost_mean == pytest.approx(0.5)
    assert summary.episode_cost_std == pytest.approx(0.5)
    assert summary.feasible_rate_mean == pytest.approx((296 / 300 + 1.0) / 2)


def test_full_protocol_runs_every_episode(empty_evaluator):
    """Test 10 repeats of 20 episodes: 200 records, 10 groups"""
    summary = empty_evaluator.evaluate(swerve_left, group_size=20, repeats=10, seed=2)
    assert len(summary.records) == 200
    assert summary.records.groupby("repeat").size().tolist() == [20] * 10


def test_reaggregation_reproduces_summary():
    """Test that the summary is a pure function of its records"""
    road_maps = [build_map(MapConfig(layout="S150,A80:0.8,S186"), seed=0)]
    evaluator = PolicyEvaluator(road_maps, EnvConfig(max_steps=200), TrafficConfig())
    policy = init_mlp((49, 16, 2), "tanh", np.random.default_rng(0), log_std_init=-0.5)
    summary = evaluator.evaluate(policy, group_size=3, repeats=3, seed=4)
    again = summarize_records(summary.records, 3, 3)
    for column in summary.to_frame().columns:
        assert again.to_frame()[column].iloc[0] == summary.to_frame()[column].iloc[0]


def test_evaluation_is_deterministic_and_leaves_policy_untouched():
    """Test identical summaries for identical seeds without mutating the policy"""
    road_maps = [build_map(MapConfig(layout="S150,A80:0.8,S186"), seed=0)]
    evaluator = PolicyEvaluator(road_maps, EnvConfig(max_steps=150), TrafficConfig())
    policy = init_mlp((49, 16, 2), "tanh", np.random.default_rng(1), log_std_init=-0.5)
    before = copy.deepcopy(policy)
    first = evaluator.evaluate(policy, group_size=2, repeats=2, seed=9)
    second = evaluator.evaluate(policy, group_size=2, repeats=2, seed=9)
    pd.testing.assert_frame_equal(first.records, second.records)
    assert params_equal(policy, before)


def test_write_summaries(empty_evaluator, tmp_path):
    """Test CSV and text comparison tables"""
    good = empty_evaluator.evaluate(lane_keeper, group_size=2, repeats=1, seed=0)
    bad = empty_evaluator.evaluate(swerve_left, group_size=2, repeats=1, seed=0)
    frame = write_summaries([("keeper", good), ("swerve", bad)], tmp_path / "summary.csv", tmp_path / "summary.txt")
    assert frame["method"].tolist() == ["keeper", "swerve"]
    assert pd.read_csv(tmp_path / "summary.csv").shape[0] == 2
    text = (tmp_path / "summary.txt").read_text()
    assert "keeper" in text and "swerve" in text
    assert format_comparison_table([("keeper", good)]).splitlines()[0].startswith("method")


def test_export_flags_accident_coordinates(tmp_path):
    """Test trajectory export through an accident cluster on a one-lane road"""
    road = build_map(MapConfig(layout="S200", lane_count=1), seed=0)
    evaluator = PolicyEvaluator([road], EnvConfig(), TrafficConfig(density=0.0, accident_prob=1.0))
    paths = evaluator.export_trajectories(lane_keeper, road, episodes=2, seed=3, output_dir=tmp_path)
    assert [p.name for p in paths] == ["trajectory_000.csv", "trajectory_001.csv"]
    frame = pd.read_csv(paths[0])
    assert list(frame.columns) == TRAJECTORY_COLUMNS
    assert frame["step"].tolist() == list(range(len(frame)))
    crashes = frame[frame["accident"] == 1]
    assert len(crashes) >= 1
    assert (frame["accident"] == frame["collision"]).all()
    np.testing.assert_allclose(crashes["accident_x"], crashes["x"])
    assert frame.loc[frame["accident"] == 0, "accident_x"].isna().all()
    again = evaluator.export_trajectories(lane_keeper, road, episodes=1, seed=3, output_dir=tmp_path / "again")
    assert again[0].read_bytes() == paths[0].read_bytes()
