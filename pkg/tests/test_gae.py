import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.append(str(project_root))

from src.rollout.gae import compute_gae, normalize_advantages
from src.utils.errors import BoundaryError, NonFiniteError, ShapeError


def brute_force_gae(rewards, values, gamma, lam, ends, terminals, bootstrap):
    """Double-loop reference: sum over k of (gamma * lam)^k * delta_{t+k} inside the episode"""
    n = len(rewards)
    deltas = np.zeros(n)
    for t in range(n):
        if ends[t]:
            next_value = 0.0 if terminals[t] else bootstrap[t]
        else:
            next_value = values[t + 1]
        deltas[t] = rewards[t] + gamma * next_value - values[t]
    advantages = np.zeros(n)
    for t in range(n):
        total, k = 0.0, 0
        while True:
            total += (gamma * lam) ** k * deltas[t + k]
            if ends[t + k]:
                break
            k += 1
        advantages[t] = total
    return advantages


def random_episodes(rng, count):
    lengths = rng.integers(1, 51, size=count)
    n = int(lengths.sum())
    ends = np.zeros(n, dtype=bool)
    ends[np.cumsum(lengths) - 1] = True
    terminals = ends & (rng.random(n) < 0.5)
    bootstrap = np.where(ends & ~terminals, rng.normal(size=n), 0.0)
    return rng.normal(size=n), rng.normal(size=n), ends, terminals, bootstrap


def test_single_terminal_step():
    """Test a one-step terminal episode with zero values"""
    advantages, returns = compute_gae([1.0], [0.0], 0.99, 0.95, [True])
    assert advantages[0] == 1.0
    assert returns[0] == 1.0


def test_lambda_one_gives_monte_carlo_returns():
    """Test that lambda = 1 with zero values telescopes to the discounted return"""
    rewards = np.array([1.0, 0.5, -2.0, 3.0])
    advantages, _ = compute_gae(rewards, np.zeros(4), 0.9, 1.0, [False, False, False, True])
    expected = [sum(0.9 ** k * rewards[t + k] for k in range(4 - t)) for t in range(4)]
    np.testing.assert_allclose(advantages, expected, rtol=0, atol=1e-12)


def test_matches_brute_force_on_random_episodes():
    """Test equivalence with the double-loop reference on 1000 random episodes"""
    rng = np.random.default_rng(42)
    for _ in range(20):
        rewards, values, ends, terminals, bootstrap = random_episodes(rng, 50)
        gamma, lam = rng.uniform(0.8, 1.0), rng.uniform(0.0, 1.0)
        advantages, returns = compute_gae(rewards, values, gamma, lam, ends, terminals, bootstrap)
        expected = brute_force_gae(rewards, values, gamma, lam, ends, terminals, bootstrap)
        np.testing.assert_allclose(advantages, expected, rtol=0, atol=1e-10)
        np.testing.assert_allclose(returns, expected + values, rtol=0, atol=1e-10)


def test_time_limit_bootstraps_from_final_value():
    """Test that a truncated end uses V(s_T) instead of zero"""
    advantages, _ = compute_gae([0.0], [0.0], 0.5, 0.95, [True], terminals=[False], bootstrap_values=[4.0])
    assert advantages[0] == pytest.approx(2.0)


def test_episodes_do_not_leak():
    """Test that an episode boundary stops the backward recursion"""
    advantages, _ = compute_gae([0.0, 5.0], [0.0, 0.0], 0.99, 1.0, [True, True])
    assert advantages[0] == 0.0


def test_unterminated_final_step_is_rejected():
    """Test that a buffer must end on an episode boundary"""
    with pytest.raises(BoundaryError):
        compute_gae([1.0, 1.0], [0.0, 0.0], 0.99, 0.95, [True, False])


def test_terminal_flag_off_boundary_is_rejected():
    """Test terminal flags on a non-final step"""
    with pytest.raises(BoundaryError):
        compute_gae([1.0, 1.0], [0.0, 0.0], 0.99, 0.95, [False, True], terminals=[True, True])


def test_misaligned_arrays_are_rejected():
    """Test shape checking"""
    with pytest.raises(ShapeError):
        compute_gae([1.0, 1.0], [0.0], 0.99, 0.95, [False, True])


def test_non_finite_advantage_names_index():
    """Test that a NaN value aborts with its step index"""
    with pytest.raises(NonFiniteError) as excinfo:
        compute_gae([1.0, 1.0, 1.0], [0.0, 0.0, np.nan], 0.99, 0.95, [True, True, True])
    assert excinfo.value.index == 2


def test_normalization_preserves_order():
    """Test that normalization keeps the ranking and standardizes the batch"""
    advantages = np.random.default_rng(0).normal(3.0, 5.0, size=200)
    normalized = normalize_advantages(advantages)
    assert normalized.mean() == pytest.approx(0.0, abs=1e-12)
    assert normalized.std() == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_array_equal(np.argsort(normalized), np.argsort(advantages))
