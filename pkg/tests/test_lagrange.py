import dataclasses
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.append(str(project_root))

from src.config.run_config import LagrangeConfig
from src.lstc.lagrange import LagrangeState, update_multipliers
from src.utils.errors import NonFiniteError


@pytest.fixture
def initial_state():
    """Create multipliers from the default configuration"""
    return LagrangeState.from_config(LagrangeConfig(), "lstc")


def test_initial_values(initial_state):
    """Test the initial multipliers and step sizes"""
    assert initial_state.lambda_long == 0.1
    assert initial_state.lambda_short == 0.5
    assert initial_state.lambda_long_lr == 0.025
    assert initial_state.lambda_short_lr == 0.01


def test_long_term_step(initial_state):
    """Test lambda_l = 0.1 + 0.025 * 2 for a violation of 2"""
    updated = update_multipliers(initial_state, initial_state.cost_limit + 2.0, 0.0)
    assert updated.lambda_long == pytest.approx(0.15, abs=1e-15)


def test_constant_violation_grows_linearly(initial_state):
    """Test k epochs of constant violation v give clip(lambda_0 + k * lr * v, 0, max)"""
    state = initial_state
    for k in range(1, 41):
        state = update_multipliers(state, initial_state.cost_limit + 0.5, 0.2)
        expected = min(0.1 + k * 0.025 * 0.5, 100.0)
        assert state.lambda_long == pytest.approx(expected, abs=1e-12)
        assert state.lambda_short == pytest.approx(0.5 + k * 0.01 * 0.2, abs=1e-12)


def test_projection_keeps_multipliers_non_negative(initial_state):
    """Test that sustained satisfaction drives lambda_l down to 0 and not below"""
    state = initial_state
    history = [state.lambda_long]
    for _ in range(20):
        state = update_multipliers(state, 0.0, 0.0)
        history.append(state.lambda_long)
    assert history[-1] == 0.0
    assert all(b <= a for a, b in zip(history, history[1:]))
    assert min(history) >= 0.0


def test_short_multiplier_decays_without_violations(initial_state):
    """Test lambda_s *= (1 - lr) when no window scores positive"""
    updated = update_multipliers(initial_state, initial_state.cost_limit, 0.0)
    assert updated.lambda_short == pytest.approx(0.5 * 0.99)


def test_multipliers_are_capped():
    """Test the lambda_max bound"""
    state = LagrangeState.from_config(dataclasses.replace(LagrangeConfig(), lambda_max=0.2))
    updated = update_multipliers(state, 1000.0, 1000.0)
    assert updated.lambda_long == 0.2
    assert updated.lambda_short == 0.2


def test_gated_mode_never_decreases():
    """Test that gated updates only fire on positive violations"""
    state = LagrangeState.from_config(dataclasses.replace(LagrangeConfig(), update_mode="gated"))
    unchanged = update_multipliers(state, 0.0, 0.0)
    assert unchanged.lambda_long == state.lambda_long
    assert unchanged.lambda_short == state.lambda_short
    raised = update_multipliers(state, state.cost_limit + 1.0, 0.5)
    assert raised.lambda_long == pytest.approx(0.1 + 0.025)
    assert raised.lambda_short == pytest.approx(0.5 + 0.005)


@pytest.mark.parametrize("mode, long_value, short_value", [
    ("ppo", 0.0, 0.0),
    ("ppo-lag", 0.1, 0.0),
    ("lstc", 0.1, 0.5),
])
def test_modes_pin_disabled_multipliers(mode, long_value, short_value):
    """Test that ablation modes keep their disabled multipliers at zero"""
    state = LagrangeState.from_config(LagrangeConfig(), mode)
    assert (state.lambda_long, state.lambda_short) == (long_value, short_value)
    for _ in range(5):
        state = update_multipliers(state, 10.0, 3.0)
    if mode == "ppo":
        assert state.lambda_long == 0.0
    if mode != "lstc":
        assert state.lambda_short == 0.0
    else:
        assert state.lambda_short > 0.5


def test_non_finite_statistics_are_rejected(initial_state):
    """Test NaN statistics"""
    with pytest.raises(NonFiniteError):
        update_multipliers(initial_state, np.nan, 0.0)
    with pytest.raises(NonFiniteError):
        update_multipliers(initial_state, 0.0, np.inf)
