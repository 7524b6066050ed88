"""Labeled trajectory windows for the validation network

A window anchored at step t holds the n + 1 observations s_t .. s_{t+n} of
the same episode, flattened into one vector. Near the end of an episode the
last observation is repeated.
"""

from dataclasses import dataclass

import numpy as np

from src.rollout.rollout_buffer import Termination


@dataclass(frozen=True)
class TrajectoryWindows:
    """All windows of one buffer, one row per anchor

    feasible[i] is False when any covered step had a cost or the window runs
    past an episode that ended by leaving the road.
    """
    observations: np.ndarray
    anchors: np.ndarray
    feasible: np.ndarray
    old_log_probs: np.ndarray
    window_length: int

    def __len__(self):
        return int(self.anchors.shape[0])

    @property
    def infeasible_count(self):
        return int(np.count_nonzero(~self.feasible))


def episode_end_indices(episode_ends):
    """For every step, the index of the last step of its episode"""
    ends = np.asarray(episode_ends, dtype=bool)
    end_positions = np.flatnonzero(ends)
    return end_positions[np.searchsorted(end_positions, np.arange(ends.shape[0]), side="left")]


def window_indices(episode_ends, window_length):
    """(N, n+1) observation indices per anchor, clipped at each episode end"""
    last = episode_end_indices(episode_ends)
    offsets = np.arange(window_length + 1)
    raw = np.arange(last.shape[0])[:, None] + offsets[None, :]
    return np.minimum(raw, last[:, None])


def window_labels(costs, episode_ends, terminations, window_length):
    """Feasibility label per anchor

    A window is infeasible iff one of its covered steps has cost > 0, or it
    would extend past an episode that ended with a road departure.
    """
    costs = np.asarray(costs, dtype=np.float64)
    last = episode_end_indices(episode_ends)
    anchors = np.arange(costs.shape[0])
    stop = np.minimum(anchors + window_length, last)
    bad = np.concatenate([[0], np.cumsum(costs > 0.0)])
    infeasible = (bad[stop + 1] - bad[anchors]) > 0
    departed = np.asarray(terminations)[last] == Termination.DEPARTURE
    infeasible |= departed & (anchors + window_length > last)
    return ~infeasible


def extract_windows(buffer, window_length):
    """Build one window per buffer step

    Args:
        buffer (RolloutBuffer): collected experience
        window_length (int): n, the number of steps after the anchor

    Returns:
        TrajectoryWindows: windows in anchor order
    """
    if window_length < 1:
        raise ValueError(f"window_length must be at least 1, got {window_length}")
    indices = window_indices(buffer.episode_ends, window_length)
    observations = buffer.observations[indices].reshape(len(buffer), -1)
    feasible = window_labels(buffer.costs, buffer.episode_ends, buffer.terminations, window_length)
    return TrajectoryWindows(observations=observations, anchors=np.arange(len(buffer)), feasible=feasible,
                             old_log_probs=buffer.log_probs.copy(), window_length=int(window_length))
