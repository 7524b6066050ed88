"""On-policy experience collection

A RolloutBuffer holds one epoch of steps as parallel arrays. Episodes are laid
out back to back; terminations[t] is non-zero exactly at the last step of an
episode and says how it ended.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np
import pandas as pd

from src.driving_sim.environment import DrivingEnv, EpisodeStatus, is_infeasible
from src.nn_core.gaussian import gaussian_sample_and_logprob
from src.nn_core.mlp import mlp_forward
from src.utils.errors import BoundaryError, ShapeError
from src.utils.io_utils import atomic_write_csv
from src.utils.seeding import ROLLOUT_STREAM, derive_seed, make_rng


class Termination(IntEnum):
    NONE = 0
    SUCCESS = 1
    DEPARTURE = 2
    TIME_LIMIT = 3
    TRUNCATED = 4


# Episodes ending this way have no successor state to bootstrap from
TERMINAL_KINDS = (Termination.SUCCESS, Termination.DEPARTURE)

_STATUS_TO_TERMINATION = {
    EpisodeStatus.SUCCESS: Termination.SUCCESS,
    EpisodeStatus.DEPARTURE: Termination.DEPARTURE,
    EpisodeStatus.MAX_STEPS: Termination.TIME_LIMIT,
}


@dataclass(frozen=True)
class PolicySnapshot:
    """Immutable networks handed to samplers for one collection pass"""
    policy: object
    value: object
    cost_value: object


@dataclass(frozen=True)
class EpisodeStats:
    """Per-episode totals, one entry per episode in buffer order"""
    rewards: np.ndarray
    costs: np.ndarray
    discounted_costs: np.ndarray
    successes: np.ndarray
    lengths: np.ndarray
    finished: np.ndarray

    def selection(self):
        """Indices of episodes that ended on their own, or all when none did"""
        idx = np.flatnonzero(self.finished)
        return idx if idx.size else np.arange(self.lengths.shape[0])


@dataclass
class RolloutBuffer:
    """One epoch of experience

    raw_actions are the pre-clip Gaussian draws the log-probabilities refer
    to; actions are what the environment received. bootstrap_values and
    bootstrap_cost_values hold V(s_T) and Vc(s_T) at episode ends cut by a
    time limit or by the step budget, and 0 elsewhere.
    """
    observations: np.ndarray
    raw_actions: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    costs: np.ndarray
    values: np.ndarray
    cost_values: np.ndarray
    feasible: np.ndarray
    episode_starts: np.ndarray
    terminations: np.ndarray
    bootstrap_values: np.ndarray
    bootstrap_cost_values: np.ndarray
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None
    cost_advantages: Optional[np.ndarray] = None
    cost_returns: Optional[np.ndarray] = None
    gamma: float = 0.99
    stats: Optional[EpisodeStats] = field(default=None, repr=False)

    def __len__(self):
        return int(self.rewards.shape[0])

    @property
    def episode_ends(self):
        return self.terminations != Termination.NONE

    @property
    def terminals(self):
        return np.isin(self.terminations, [int(kind) for kind in TERMINAL_KINDS])

    @property
    def feasible_rate(self):
        return float(np.mean(self.feasible)) if len(self) else 0.0

    def validate(self):
        """Check array lengths and that episode boundaries partition the index range

        Raises:
            ShapeError: when arrays disagree in length
            BoundaryError: when starts and ends do not alternate
        """
        n = len(self)
        for name in ("observations", "raw_actions", "actions", "log_probs", "costs", "values", "cost_values",
                     "feasible", "episode_starts", "terminations", "bootstrap_values", "bootstrap_cost_values"):
            if getattr(self, name).shape[0] != n:
                raise ShapeError(f"buffer array '{name}' has length {getattr(self, name).shape[0]}, expected {n}")
        if n == 0:
            return
        ends = self.episode_ends
        expected_starts = np.concatenate([[True], ends[:-1]])
        if not ends[-1]:
            raise BoundaryError("the last buffer step does not end an episode")
        if not np.array_equal(expected_starts, self.episode_starts.astype(bool)):
            first = int(np.flatnonzero(expected_starts != self.episode_starts.astype(bool))[0])
            raise BoundaryError(f"episode start flag inconsistent with episode ends at index {first}")

    def compute_episode_stats(self):
        """Summaries per episode: totals, discounted cost from the start, success"""
        ends = np.flatnonzero(self.episode_ends)
        starts = np.concatenate([[0], ends[:-1] + 1])
        rewards, costs, discounted, successes, lengths, finished = [], [], [], [], [], []
        for start, end in zip(starts, ends):
            episode_costs = self.costs[start:end + 1]
            discounts = self.gamma ** np.arange(episode_costs.shape[0])
            rewards.append(float(np.sum(self.rewards[start:end + 1])))
            costs.append(float(np.sum(episode_costs)))
            discounted.append(float(np.sum(discounts * episode_costs)))
            successes.append(self.terminations[end] == Termination.SUCCESS)
            lengths.append(int(end - start + 1))
            finished.append(self.terminations[end] != Termination.TRUNCATED)
        self.stats = EpisodeStats(np.array(rewards), np.array(costs), np.array(discounted),
                                  np.array(successes, dtype=bool), np.array(lengths, dtype=np.int64),
                                  np.array(finished, dtype=bool))
        return self.stats

    def to_frame(self):
        """Per-step table for debugging (observations omitted)"""
        frame = pd.DataFrame({
            "step": np.arange(len(self)),
            "episode_start": self.episode_starts.astype(int),
            "termination": [Termination(int(t)).name.lower() for t in self.terminations],
            "steer_cmd": self.actions[:, 0],
            "accel_cmd": self.actions[:, 1],
            "log_prob": self.log_probs,
            "reward": self.rewards,
            "cost": self.costs,
            "feasible": self.feasible.astype(int),
            "value": self.values,
            "cost_value": self.cost_values,
        })
        for name in ("advantages", "returns", "cost_advantages", "cost_returns"):
            array = getattr(self, name)
            if array is not None:
                frame[name] = array
        return frame

    def dump_csv(self, path):
        atomic_write_csv(self.to_frame(), path)
        return path


def concatenate_buffers(buffers, gamma):
    """Join worker sub-buffers in the given order"""
    names = ("observations", "raw_actions", "actions", "log_probs", "rewards", "costs", "values", "cost_values",
             "feasible", "episode_starts", "terminations", "bootstrap_values", "bootstrap_cost_values")
    joined = RolloutBuffer(**{name: np.concatenate([getattr(b, name) for b in buffers]) for name in names},
                           gamma=gamma)
    joined.validate()
    joined.compute_episode_stats()
    return joined


class RolloutCollector:
    """Run episodes with a frozen policy until a step budget is filled

    Args:
        road_maps (list): map pool; each episode draws one uniformly
        env_config (EnvConfig): vehicle and reward constants
        traffic_config (TrafficConfig): traffic settings
        seed (int): run seed
        workers (int): independent collection workers
        gamma (float): discount used for per-episode discounted cost
    """

    def __init__(self, road_maps, env_config, traffic_config, seed, workers=1, gamma=0.99):
        if not road_maps:
            raise ValueError("at least one road map is required")
        self.road_maps = list(road_maps)
        self.env_config = env_config
        self.traffic_config = traffic_config
        self.seed = int(seed)
        self.workers = max(1, int(workers))
        self.gamma = gamma
        self.logger = logging.getLogger(__name__)

    def _worker_budgets(self, total_steps):
        workers = min(self.workers, total_steps)
        base, extra = divmod(total_steps, workers)
        return [base + (1 if w < extra else 0) for w in range(workers)]

    def collect_rollout(self, snapshot, total_steps, epoch=0):
        """Collect exactly total_steps steps under snapshot

        Returns:
            RolloutBuffer: concatenated worker buffers with episode stats
        """
        if total_steps < 1:
            raise ValueError(f"total_steps must be positive, got {total_steps}")
        budgets = self._worker_budgets(int(total_steps))
        if len(budgets) == 1:
            parts = [self._collect_worker(snapshot, budgets[0], epoch, 0)]
        else:
            with ThreadPoolExecutor(max_workers=len(budgets)) as pool:
                futures = [pool.submit(self._collect_worker, snapshot, budget, epoch, w)
                           for w, budget in enumerate(budgets)]
                parts = [future.result() for future in futures]
        buffer = concatenate_buffers(parts, self.gamma)
        self.logger.debug(f"Collected {len(buffer)} steps in {len(buffer.stats.lengths)} episodes (epoch {epoch})")
        return buffer

    def _collect_worker(self, snapshot, budget, epoch, worker):
        rng = make_rng(self.seed, ROLLOUT_STREAM, epoch, worker)
        obs_list, raw_list, act_list = [], [], []
        logp, rewards, costs, values, cost_values = [], [], [], [], []
        starts, terminations, boot_v, boot_vc = [], [], [], []

        log_std = snapshot.policy.log_std
        episode = 0
        steps = 0
        while steps < budget:
            road_map = self.road_maps[int(rng.integers(len(self.road_maps)))]
            env = DrivingEnv(road_map, self.env_config, self.traffic_config,
                             seed=derive_seed(self.seed, ROLLOUT_STREAM, epoch, worker, episode))
            observation = env.reset()
            episode += 1
            first = True
            while True:
                mean = mlp_forward(snapshot.policy, observation)
                draw = gaussian_sample_and_logprob(mean, log_std, rng)
                outcome = env.step(draw.action)

                obs_list.append(observation)
                raw_list.append(draw.raw_sample)
                act_list.append(draw.action)
                logp.append(draw.log_prob)
                rewards.append(outcome.reward)
                costs.append(float(outcome.cost))
                values.append(float(mlp_forward(snapshot.value, observation)[0]))
                cost_values.append(float(mlp_forward(snapshot.cost_value, observation)[0]))
                starts.append(first)
                first = False
                steps += 1

                if outcome.done:
                    kind = _STATUS_TO_TERMINATION[outcome.status]
                elif steps >= budget:
                    kind = Termination.TRUNCATED
                else:
                    kind = Termination.NONE
                terminations.append(int(kind))
                if kind in (Termination.TIME_LIMIT, Termination.TRUNCATED):
                    boot_v.append(float(mlp_forward(snapshot.value, outcome.observation)[0]))
                    boot_vc.append(float(mlp_forward(snapshot.cost_value, outcome.observation)[0]))
                else:
                    boot_v.append(0.0)
                    boot_vc.append(0.0)
                observation = outcome.observation
                if kind != Termination.NONE:
                    break

        costs_array = np.array(costs)
        return RolloutBuffer(
            observations=np.array(obs_list),
            raw_actions=np.array(raw_list),
            actions=np.array(act_list),
            log_probs=np.array(logp),
            rewards=np.array(rewards),
            costs=costs_array,
            values=np.array(values),
            cost_values=np.array(cost_values),
            feasible=~is_infeasible(costs_array),
            episode_starts=np.array(starts, dtype=bool),
            terminations=np.array(terminations, dtype=np.int64),
            bootstrap_values=np.array(boot_v),
            bootstrap_cost_values=np.array(boot_vc),
            gamma=self.gamma,
        )
