"""Generalized advantage estimation for the reward and cost critics"""

import dataclasses
import logging

import numpy as np

from src.utils.errors import BoundaryError, NonFiniteError, ShapeError

logger = logging.getLogger(__name__)


def compute_gae(rewards, values, gamma, gae_lambda, episode_ends, terminals=None, bootstrap_values=None):
    """Advantages and return targets over back-to-back episodes

    delta_t = r_t + gamma * V(s_{t+1}) * (1 - terminal_t) - V(s_t), where
    V(s_{t+1}) is values[t+1] inside an episode and bootstrap_values[t] at an
    episode end that was cut by a time limit.

    Args:
        rewards (array-like): per-step rewards (or costs)
        values (array-like): V(s_t) predictions
        gamma (float): discount in [0, 1]
        gae_lambda (float): GAE smoothing in [0, 1]
        episode_ends (array-like of bool): True at the last step of each episode
        terminals (array-like of bool, optional): episode ends with no successor
            state; defaults to every episode end
        bootstrap_values (array-like, optional): V(s_T) at non-terminal ends

    Returns:
        tuple: (advantages, return targets) as float64 arrays

    Raises:
        ShapeError: when arrays are not aligned
        BoundaryError: when the final step is not an episode end or a terminal
            flag sits on a non-end step
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    ends = np.asarray(episode_ends, dtype=bool)
    n = rewards.shape[0]
    terminals = ends.copy() if terminals is None else np.asarray(terminals, dtype=bool)
    bootstrap = np.zeros(n) if bootstrap_values is None else np.asarray(bootstrap_values, dtype=np.float64)
    for name, array in (("values", values), ("episode_ends", ends), ("terminals", terminals),
                        ("bootstrap_values", bootstrap)):
        if array.shape != (n,):
            raise ShapeError(f"{name} has shape {array.shape}, expected ({n},)")
    if not 0.0 <= gamma <= 1.0 or not 0.0 <= gae_lambda <= 1.0:
        raise ValueError(f"gamma and gae_lambda must lie in [0, 1], got {gamma}, {gae_lambda}")
    if n == 0:
        return np.zeros(0), np.zeros(0)
    if not ends[-1]:
        raise BoundaryError("the last step must end an episode")
    if np.any(terminals & ~ends):
        raise BoundaryError(f"terminal flag on a non-final step at index {int(np.flatnonzero(terminals & ~ends)[0])}")

    next_values = np.empty(n)
    next_values[:-1] = values[1:]
    next_values = np.where(ends, np.where(terminals, 0.0, bootstrap), next_values)
    deltas = rewards + gamma * next_values - values

    advantages = np.empty(n)
    running = 0.0
    decay = gamma * gae_lambda
    for t in range(n - 1, -1, -1):
        if ends[t]:
            running = 0.0
        running = deltas[t] + decay * running
        advantages[t] = running
    if not np.all(np.isfinite(advantages)):
        bad = int(np.flatnonzero(~np.isfinite(advantages))[0])
        raise NonFiniteError(f"non-finite advantage at index {bad}", index=bad)
    return advantages, advantages + values


def normalize_advantages(advantages, eps=1e-8):
    """Zero mean, unit variance (population std) per epoch"""
    advantages = np.asarray(advantages, dtype=np.float64)
    if advantages.size == 0:
        return advantages
    return (advantages - advantages.mean()) / (advantages.std() + eps)


def compute_advantages(buffer, gamma, gae_lambda):
    """Fill reward and cost advantages and return targets on a buffer

    Reward advantages are normalized; cost advantages are left raw so the
    long-term penalty keeps the scale of the cost threshold.

    Returns:
        RolloutBuffer: a copy with advantages, returns, cost_advantages, cost_returns
    """
    ends, terminals = buffer.episode_ends, buffer.terminals
    advantages, returns = compute_gae(buffer.rewards, buffer.values, gamma, gae_lambda, ends, terminals,
                                      buffer.bootstrap_values)
    cost_advantages, cost_returns = compute_gae(buffer.costs, buffer.cost_values, gamma, gae_lambda, ends,
                                                terminals, buffer.bootstrap_cost_values)
    return dataclasses.replace(buffer, advantages=normalize_advantages(advantages), returns=returns,
                               cost_advantages=cost_advantages, cost_returns=cost_returns)
