"""Diagonal-Gaussian policy head"""

from dataclasses import dataclass

import numpy as np

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GaussianAction:
    """One sampled action

    raw_sample is the pre-clip draw the log-probability refers to; action is
    the same vector clipped to [-1, 1] and is what the environment receives.
    """
    mean: np.ndarray
    log_std: np.ndarray
    raw_sample: np.ndarray
    action: np.ndarray
    log_prob: float


def gaussian_log_prob(mean, log_std, sample):
    """Log-density of a diagonal Gaussian, summed over the last axis"""
    mean = np.asarray(mean, dtype=np.float64)
    log_std = np.asarray(log_std, dtype=np.float64)
    z = (np.asarray(sample, dtype=np.float64) - mean) / np.exp(log_std)
    return -0.5 * np.sum(z * z + 2.0 * log_std + LOG_2PI, axis=-1)


def gaussian_entropy(log_std):
    """Entropy of a diagonal Gaussian with the given log-std vector"""
    log_std = np.asarray(log_std, dtype=np.float64)
    return float(np.sum(log_std + 0.5 * (LOG_2PI + 1.0)))


def clip_action(raw):
    return np.clip(raw, -1.0, 1.0)


def gaussian_sample_and_logprob(mean, log_std, rng):
    """Draw mean + std * z with z ~ N(0, I) from rng

    Args:
        mean (array-like): action mean
        log_std (array-like): finite log standard deviations
        rng (numpy.random.Generator): sampling source

    Returns:
        GaussianAction: the draw, its clipped action and its log-probability
    """
    mean = np.asarray(mean, dtype=np.float64)
    log_std = np.asarray(log_std, dtype=np.float64)
    if not np.all(np.isfinite(log_std)):
        raise ValueError("log_std must be finite")
    z = rng.standard_normal(mean.shape)
    raw = mean + np.exp(log_std) * z
    return GaussianAction(mean, log_std, raw, clip_action(raw), float(gaussian_log_prob(mean, log_std, raw)))
