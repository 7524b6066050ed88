import sys
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.append(str(project_root))

from src.config.run_config import parse_config_text, with_overrides
from src.driving_sim.road_map import build_map_pool
from src.lstc.trainer import LSTCTrainer, init_agent_state, minibatches
from src.nn_core.mlp import params_equal
from src.utils.errors import EpochAbortedError, NonFiniteError

TINY_CONFIG = """
[run]
seed = 3
total_steps = 500
workers = 2

[network]
hidden_layers = 1
hidden_size = 16

[ppo]
batch_size = 200
minibatch_size = 100
update_epochs = 2
validation_epochs = 1
window_length = 3

[env]
max_steps = 80

[map]
layout = S60,A40:0.5,S40
train_maps = 1
eval_maps = 1

[traffic]
density = 20
accident_prob = 1.0
"""


@pytest.fixture
def tiny_config():
    """Create a configuration small enough for a few quick epochs"""
    return parse_config_text(TINY_CONFIG)


def make_trainer(run_config):
    return LSTCTrainer(run_config, build_map_pool(run_config.map))


def test_network_shapes(tiny_config):
    """Test network sizes, including the (n + 1) * 49 validation input"""
    state = init_agent_state(tiny_config)
    assert state.policy.sizes == (49, 16, 2)
    assert state.value.sizes == (49, 16, 1)
    assert state.validation.sizes == (4 * 49, 16, 1)
    assert state.lagrange.lambda_long == 0.1
    assert state.lagrange.lambda_short == 0.5


def test_minibatches_cover_every_index_once():
    """Test shuffled minibatch partition"""
    chunks = minibatches(250, 100, np.random.default_rng(0))
    assert [len(c) for c in chunks] == [100, 100, 50]
    np.testing.assert_array_equal(np.sort(np.concatenate(chunks)), np.arange(250))


def test_epoch_report_is_finite_and_in_range(tiny_config):
    """Test one epoch: step count, rates and multiplier bounds"""
    trainer = make_trainer(tiny_config)
    state = init_agent_state(tiny_config)
    new_state, report = trainer.train_epoch(state)
    assert new_state.epoch == 1
    assert report.steps == new_state.steps == 200
    assert 0.0 <= report.success_rate <= 1.0
    assert 0.0 <= report.feasible_rate <= 1.0
    assert report.positive_validation >= 0.0
    assert report.lambda_l >= 0.0 and report.lambda_s >= 0.0
    assert len(report.to_metrics_row()) == 12
    assert not params_equal(new_state.policy, state.policy)
    assert not params_equal(new_state.validation, state.validation)
    assert state.epoch == 0


def test_training_is_deterministic(tiny_config):
    """Test bit-identical reports for identical seeds"""
    first = make_trainer(tiny_config).train(init_agent_state(tiny_config), 400)[1]
    again = make_trainer(tiny_config).train(init_agent_state(tiny_config), 400)[1]
    assert first == again


def test_final_epoch_shrinks_to_the_budget(tiny_config):
    """Test epochs of 200, 200 and 100 steps for a 500-step budget"""
    seen = []
    state, reports = make_trainer(tiny_config).train(init_agent_state(tiny_config), 500,
                                                     on_epoch=lambda s, r: seen.append(r.steps))
    assert [r.steps for r in reports] == [200, 400, 500]
    assert seen == [200, 400, 500]
    assert state.epoch == 3


@pytest.mark.parametrize("mode", ["ppo", "ppo-lag"])
def test_ablation_modes_pin_multipliers(tiny_config, mode):
    """Test that ablation modes keep disabled multipliers at zero and leave the validation net alone"""
    run_config = with_overrides(tiny_config, mode=mode)
    state = init_agent_state(run_config)
    new_state, report = make_trainer(run_config).train_epoch(state)
    assert report.lambda_s == 0.0
    if mode == "ppo":
        assert report.lambda_l == 0.0
    assert params_equal(new_state.validation, state.validation)
    assert np.isfinite(report.loss_B)


def test_non_finite_loss_aborts_the_epoch(tiny_config):
    """Test that a numerical failure raises EpochAbortedError and leaves the state untouched"""
    trainer = make_trainer(tiny_config)
    state = init_agent_state(tiny_config)
    with patch("src.lstc.trainer.critic_losses", side_effect=NonFiniteError("non-finite critic loss")):
        with pytest.raises(EpochAbortedError) as excinfo:
            trainer.train_epoch(state)
    assert excinfo.value.state is state
    assert state.epoch == 0
    assert params_equal(state.policy, init_agent_state(tiny_config).policy)
    # The untouched state trains normally afterwards
    assert trainer.train_epoch(state)[0].epoch == 1
