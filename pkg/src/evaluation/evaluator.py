"""Frozen-policy evaluation and trajectory export

Evaluation runs groups of episodes on unseen maps with the deterministic mean
action and reports success rate, episode cost, episode reward and feasible
state rate as mean and standard deviation over the repeated groups.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from src.driving_sim.environment import DrivingEnv, EpisodeStatus
from src.nn_core.mlp import MlpParams, mlp_forward
from src.utils.io_utils import atomic_write_csv, atomic_write_text
from src.utils.seeding import EVALUATION_STREAM, EXPORT_STREAM, derive_seed, make_rng

METRICS = ("success_rate", "episode_cost", "episode_reward", "feasible_rate")

TRAJECTORY_COLUMNS = ["step", "t", "x", "y", "heading", "speed", "steer_cmd", "accel_cmd", "reward", "cost",
                      "collision", "departure", "accident", "accident_x", "accident_y"]


def mean_action_controller(policy):
    """Controller returning the Gaussian mean of a policy network"""
    def act(observation, env):
        return mlp_forward(policy, observation)
    return act


def as_controller(policy_or_controller):
    if isinstance(policy_or_controller, MlpParams):
        return mean_action_controller(policy_or_controller)
    if callable(policy_or_controller):
        return policy_or_controller
    raise TypeError(f"expected MlpParams or a callable controller, got {type(policy_or_controller).__name__}")


@dataclass(frozen=True)
class EvalSummary:
    """Aggregated evaluation metrics plus the per-episode records they come from"""
    success_rate_mean: float
    success_rate_std: float
    episode_cost_mean: float
    episode_cost_std: float
    episode_reward_mean: float
    episode_reward_std: float
    feasible_rate_mean: float
    feasible_rate_std: float
    group_size: int
    repeats: int
    records: pd.DataFrame

    def to_frame(self, label=None):
        """One-row table of the aggregates"""
        row = {} if label is None else {"method": label}
        for metric in METRICS:
            row[f"{metric}_mean"] = getattr(self, f"{metric}_mean")
            row[f"{metric}_std"] = getattr(self, f"{metric}_std")
        row["group_size"] = self.group_size
        row["repeats"] = self.repeats
        return pd.DataFrame([row])


def summarize_records(records, group_size, repeats):
    """Aggregate per-episode records into an EvalSummary

    Each repeat's group contributes one mean per metric; the summary holds the
    mean and population standard deviation of those group means. The feasible
    state rate of a group is its feasible steps over its total steps.
    """
    groups = records.groupby("repeat", sort=True).agg(
        success_rate=("success", "mean"),
        episode_cost=("cost", "mean"),
        episode_reward=("reward", "mean"),
        feasible_steps=("feasible_steps", "sum"),
        steps=("steps", "sum"),
    )
    groups["feasible_rate"] = groups["feasible_steps"] / groups["steps"]
    values = {}
    for metric in METRICS:
        column = groups[metric].to_numpy(dtype=np.float64)
        values[f"{metric}_mean"] = float(np.mean(column))
        values[f"{metric}_std"] = float(np.std(column))
    return EvalSummary(group_size=int(group_size), repeats=int(repeats), records=records, **values)


def format_comparison_table(labelled_summaries):
    """Human-readable table with one row per evaluated policy"""
    header = f"{'method':<20} {'success rate':>16} {'episode cost':>16} {'episode reward':>18} {'feasible rate':>16}"
    lines = [header, "-" * len(header)]
    for label, summary in labelled_summaries:
        lines.append(
            f"{label:<20} "
            f"{summary.success_rate_mean:>7.2f} ± {summary.success_rate_std:<6.2f} "
            f"{summary.episode_cost_mean:>7.2f} ± {summary.episode_cost_std:<6.2f} "
            f"{summary.episode_reward_mean:>9.2f} ± {summary.episode_reward_std:<6.2f} "
            f"{summary.feasible_rate_mean:>7.3f} ± {summary.feasible_rate_std:<6.3f}")
    return "\n".join(lines)


def write_summaries(labelled_summaries, csv_path, text_path=None):
    """Write the comparison table as CSV (and optionally as text)"""
    frame = pd.concat([summary.to_frame(label) for label, summary in labelled_summaries], ignore_index=True)
    atomic_write_csv(frame, csv_path)
    if text_path is not None:
        atomic_write_text(text_path, format_comparison_table(labelled_summaries) + "\n")
    return frame


class PolicyEvaluator:
    """Evaluates a frozen policy on a map pool

    Args:
        road_maps (list): evaluation map pool (unseen during training)
        env_config (EnvConfig): vehicle and reward constants
        traffic_config (TrafficConfig): traffic settings
    """

    def __init__(self, road_maps, env_config, traffic_config):
        if not road_maps:
            raise ValueError("at least one evaluation map is required")
        self.road_maps = list(road_maps)
        self.env_config = env_config
        self.traffic_config = traffic_config
        self.logger = logging.getLogger(__name__)

    def run_episode(self, controller, road_map, traffic_seed, on_step=None):
        """Run one episode to completion

        Returns:
            dict: reward, cost, steps, feasible_steps, success and final status
        """
        env = DrivingEnv(road_map, self.env_config, self.traffic_config, seed=traffic_seed)
        observation = env.reset()
        total_reward, total_cost, steps, feasible_steps = 0.0, 0, 0, 0
        while True:
            action = np.asarray(controller(observation, env), dtype=np.float64)
            outcome = env.step(action)
            if on_step is not None:
                on_step(steps, action, outcome)
            total_reward += outcome.reward
            total_cost += outcome.cost
            feasible_steps += int(outcome.feasible)
            steps += 1
            observation = outcome.observation
            if outcome.done:
                break
        return {
            "reward": total_reward,
            "cost": total_cost,
            "steps": steps,
            "feasible_steps": feasible_steps,
            "success": outcome.status is EpisodeStatus.SUCCESS,
            "status": outcome.status.value,
        }

    def evaluate(self, policy, group_size, repeats, seed):
        """Run repeats x group_size episodes and aggregate

        Args:
            policy (MlpParams or callable): policy network (mean action is used) or
                a controller(observation, env) -> action
            group_size (int): episodes per group
            repeats (int): number of groups
            seed (int): evaluation seed

        Returns:
            EvalSummary: aggregated metrics with per-episode records
        """
        if group_size < 1 or repeats < 1:
            raise ValueError(f"group_size and repeats must be positive, got {group_size}, {repeats}")
        controller = as_controller(policy)
        rows = []
        for repeat in range(repeats):
            rng = make_rng(seed, EVALUATION_STREAM, repeat)
            for episode in range(group_size):
                map_index = int(rng.integers(len(self.road_maps)))
                traffic_seed = derive_seed(seed, EVALUATION_STREAM, repeat, episode)
                result = self.run_episode(controller, self.road_maps[map_index], traffic_seed)
                rows.append({"repeat": repeat, "episode": episode, "map": map_index, **result})
                self.logger.debug(f"Eval repeat {repeat} episode {episode}: {result['status']}, "
                                  f"cost {result['cost']}, reward {result['reward']:.2f}")
        records = pd.DataFrame(rows)
        summary = summarize_records(records, group_size, repeats)
        self.logger.info(f"Evaluated {len(records)} episodes: success {summary.success_rate_mean:.2f}"
                         f" ± {summary.success_rate_std:.2f}, cost {summary.episode_cost_mean:.2f}"
                         f" ± {summary.episode_cost_std:.2f}")
        return summary

    def export_trajectories(self, policy, road_map, episodes, seed, output_dir):
        """Write one per-step trajectory CSV per episode

        Collision steps carry accident = 1 and the ego coordinates in
        accident_x / accident_y; other rows leave those empty.

        Returns:
            list: written file paths
        """
        controller = as_controller(policy)
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        dt = self.env_config.dt
        paths = []
        for episode in range(episodes):
            rows = []

            def record(step, action, outcome):
                info = outcome.info
                clipped = np.clip(action, -1.0, 1.0)
                rows.append({
                    "step": step, "t": (step + 1) * dt, "x": info.x, "y": info.y, "heading": info.heading,
                    "speed": info.speed, "steer_cmd": clipped[0], "accel_cmd": clipped[1],
                    "reward": outcome.reward, "cost": outcome.cost, "collision": int(info.collision),
                    "departure": int(info.departure), "accident": int(info.collision),
                    "accident_x": info.x if info.collision else np.nan,
                    "accident_y": info.y if info.collision else np.nan,
                })

            result = self.run_episode(controller, road_map, derive_seed(seed, EXPORT_STREAM, episode), record)
            path = output_dir / f"trajectory_{episode:03d}.csv"
            atomic_write_csv(pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS), path)
            paths.append(path)
            self.logger.info(f"Exported episode {episode} ({result['steps']} steps, {result['status']}) to {path}")
        return paths
