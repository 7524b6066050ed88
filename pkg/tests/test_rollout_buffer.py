import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.append(str(project_root))

from src.config.run_config import EnvConfig, MapConfig, TrafficConfig
from src.driving_sim.environment import is_infeasible
from src.driving_sim.road_map import build_map
from src.nn_core.mlp import init_mlp
from src.rollout.gae import compute_advantages
from src.rollout.rollout_buffer import PolicySnapshot, RolloutCollector, Termination
from src.utils.errors import BoundaryError


def make_snapshot(seed=0, output_scale=1.0, log_std=-0.5):
    rng = np.random.default_rng(seed)
    return PolicySnapshot(
        policy=init_mlp((49, 16, 2), "tanh", rng, output_scale=output_scale, log_std_init=log_std),
        value=init_mlp((49, 16, 1), "tanh", rng),
        cost_value=init_mlp((49, 16, 1), "tanh", rng),
    )


@pytest.fixture
def road_maps():
    """Create a small map pool"""
    return [build_map(MapConfig(layout="S200"), seed=0), build_map(MapConfig(layout="S120,A60:0.6,S80"), seed=0)]


def test_budget_inside_one_episode_truncates(road_maps):
    """Test 100 steps with a 1000-step horizon: a single truncated episode"""
    collector = RolloutCollector(road_maps[:1], EnvConfig(), TrafficConfig(density=0.0, accident_prob=0.0), seed=1)
    buffer = collector.collect_rollout(make_snapshot(output_scale=0.0, log_std=-20.0), 100)
    assert len(buffer) == 100
    assert buffer.terminations[-1] == Termination.TRUNCATED
    assert np.count_nonzero(buffer.episode_ends) == 1
    assert buffer.bootstrap_values[-1] != 0.0
    assert not buffer.stats.finished[0]
    np.testing.assert_array_equal(buffer.stats.selection(), [0])


def test_time_limits_and_truncation(road_maps):
    """Test episode layout when the horizon is shorter than the budget"""
    collector = RolloutCollector(road_maps[:1], EnvConfig(max_steps=30),
                                 TrafficConfig(density=0.0, accident_prob=0.0), seed=1)
    buffer = collector.collect_rollout(make_snapshot(output_scale=0.0, log_std=-20.0), 100)
    ends = np.flatnonzero(buffer.episode_ends)
    np.testing.assert_array_equal(ends, [29, 59, 89, 99])
    np.testing.assert_array_equal(buffer.terminations[ends], [Termination.TIME_LIMIT] * 3 + [Termination.TRUNCATED])
    np.testing.assert_array_equal(buffer.stats.lengths, [30, 30, 30, 10])
    np.testing.assert_array_equal(buffer.stats.selection(), [0, 1, 2])
    assert not buffer.terminals.any()


@pytest.mark.parametrize("workers", [1, 3])
def test_collection_is_deterministic(road_maps, workers):
    """Test identical buffers for identical seeds and snapshots"""
    config = (EnvConfig(max_steps=120), TrafficConfig())
    first = RolloutCollector(road_maps, *config, seed=5, workers=workers).collect_rollout(make_snapshot(), 400, epoch=2)
    again = RolloutCollector(road_maps, *config, seed=5, workers=workers).collect_rollout(make_snapshot(), 400, epoch=2)
    assert len(first) == 400
    for name in ("observations", "raw_actions", "rewards", "costs", "log_probs", "terminations", "values"):
        np.testing.assert_array_equal(getattr(first, name), getattr(again, name))


def test_epochs_draw_different_experience(road_maps):
    """Test that the epoch index changes the rollout stream"""
    collector = RolloutCollector(road_maps, EnvConfig(max_steps=120), TrafficConfig(), seed=5)
    first = collector.collect_rollout(make_snapshot(), 200, epoch=0)
    second = collector.collect_rollout(make_snapshot(), 200, epoch=1)
    assert not np.array_equal(first.raw_actions, second.raw_actions)


def test_feasible_rate_counts_costly_steps(road_maps):
    """Test feasible rate = 1 - (steps with cost > 0) / steps"""
    collector = RolloutCollector(road_maps, EnvConfig(max_steps=150), TrafficConfig(), seed=2)
    buffer = collector.collect_rollout(make_snapshot(log_std=0.5), 600)
    assert buffer.feasible_rate == pytest.approx(1.0 - np.count_nonzero(buffer.costs > 0) / len(buffer))
    np.testing.assert_array_equal(buffer.feasible, ~is_infeasible(buffer.costs))
    stats = buffer.stats
    assert stats.costs.sum() == pytest.approx(buffer.costs.sum())
    assert stats.lengths.sum() == len(buffer)


def test_validate_rejects_broken_boundaries(road_maps):
    """Test boundary checking on a tampered buffer"""
    collector = RolloutCollector(road_maps[:1], EnvConfig(max_steps=30),
                                 TrafficConfig(density=0.0, accident_prob=0.0), seed=1)
    buffer = collector.collect_rollout(make_snapshot(output_scale=0.0, log_std=-20.0), 60)
    buffer.episode_starts[10] = True
    with pytest.raises(BoundaryError):
        buffer.validate()


def test_dump_csv(road_maps, tmp_path):
    """Test the debugging dump after advantages are filled"""
    collector = RolloutCollector(road_maps, EnvConfig(max_steps=50), TrafficConfig(), seed=3)
    buffer = compute_advantages(collector.collect_rollout(make_snapshot(), 80), 0.99, 0.95)
    path = buffer.dump_csv(tmp_path / "buffer.csv")
    frame = pd.read_csv(path)
    assert len(frame) == 80
    assert {"reward", "cost", "feasible", "termination", "advantages", "cost_returns"} <= set(frame.columns)
    assert frame["termination"].iloc[-1] != "none"


def test_collector_requires_maps():
    """Test that an empty map pool is rejected"""
    with pytest.raises(ValueError):
        RolloutCollector([], EnvConfig(), TrafficConfig(), seed=0)
