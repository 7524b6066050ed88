"""Dual-constraint training loop

Each epoch collects a rollout, estimates reward and cost advantages, updates
the Lagrange multipliers, trains the validation network on trajectory
windows, and finally updates the policy and both critics on the penalized
clipped objective.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass

import numpy as np

from src.config.config import ACTION_DIM, OBSERVATION_DIM
from src.lstc.lagrange import LagrangeState, update_multipliers
from src.lstc.losses import critic_losses, hinge_validation_loss, lagrangian_objective, validation_loss
from src.nn_core.gaussian import gaussian_entropy
from src.nn_core.mlp import adam_step, init_mlp, mlp_forward
from src.rollout.gae import compute_advantages
from src.rollout.rollout_buffer import PolicySnapshot, RolloutCollector
from src.rollout.windows import extract_windows
from src.utils.errors import EpochAbortedError, NonFiniteError, ShapeError
from src.utils.seeding import NETWORK_INIT_STREAM, SHUFFLE_STREAM, make_rng

# Initial gain of the policy mean head
POLICY_OUTPUT_SCALE = 0.01


@dataclass(frozen=True)
class AgentState:
    """Everything training mutates, replaced as a whole after each epoch"""
    policy: object
    value: object
    cost_value: object
    validation: object
    lagrange: LagrangeState
    epoch: int = 0
    steps: int = 0

    def snapshot(self):
        return PolicySnapshot(self.policy, self.value, self.cost_value)


@dataclass(frozen=True)
class EpochReport:
    """Summary of one training epoch"""
    epoch: int
    steps: int
    ep_reward: float
    ep_cost: float
    discounted_cost: float
    success_rate: float
    feasible_rate: float
    positive_validation: float
    lambda_l: float
    lambda_s: float
    loss_pi: float
    loss_v: float
    loss_vc: float
    loss_B: float
    entropy: float = 0.0
    approx_kl: float = 0.0
    clip_fraction: float = 0.0

    def to_metrics_row(self):
        return {
            "epoch": self.epoch, "steps": self.steps, "ep_reward": self.ep_reward, "ep_cost": self.ep_cost,
            "success_rate": self.success_rate, "feasible_rate": self.feasible_rate,
            "lambda_l": self.lambda_l, "lambda_s": self.lambda_s, "loss_pi": self.loss_pi,
            "loss_v": self.loss_v, "loss_vc": self.loss_vc, "loss_B": self.loss_B,
        }


def network_sizes(network_config, input_size, output_size):
    return [input_size] + [network_config.hidden_size] * network_config.hidden_layers + [output_size]


def init_agent_state(run_config):
    """Fresh networks and initial multipliers for a run

    Each network draws its weights from its own seed stream, so the result
    depends only on the run seed and the configuration.
    """
    net, seed = run_config.network, run_config.run.seed
    window_input = (run_config.ppo.window_length + 1) * OBSERVATION_DIM
    policy = init_mlp(network_sizes(net, OBSERVATION_DIM, ACTION_DIM), net.activation,
                      make_rng(seed, NETWORK_INIT_STREAM, 0), output_scale=POLICY_OUTPUT_SCALE,
                      log_std_init=net.log_std_init)
    value = init_mlp(network_sizes(net, OBSERVATION_DIM, 1), net.activation, make_rng(seed, NETWORK_INIT_STREAM, 1))
    cost_value = init_mlp(network_sizes(net, OBSERVATION_DIM, 1), net.activation,
                          make_rng(seed, NETWORK_INIT_STREAM, 2))
    validation = init_mlp(network_sizes(net, window_input, 1), net.activation, make_rng(seed, NETWORK_INIT_STREAM, 3))
    return AgentState(policy, value, cost_value, validation,
                      LagrangeState.from_config(run_config.lagrange, run_config.run.mode))


def minibatches(size, minibatch_size, rng):
    """Shuffled index chunks covering range(size) once"""
    order = rng.permutation(size)
    return [order[i:i + minibatch_size] for i in range(0, size, minibatch_size)]


class LSTCTrainer:
    """Runs training epochs for one configuration

    Args:
        run_config (RunConfig): full run configuration
        road_maps (list): training map pool
    """

    def __init__(self, run_config, road_maps):
        self.config = run_config
        self.mode = run_config.run.mode
        self.collector = RolloutCollector(road_maps, run_config.env, run_config.traffic, run_config.run.seed,
                                          workers=run_config.run.workers, gamma=run_config.ppo.gamma)
        self.last_buffer = None
        self.logger = logging.getLogger(__name__)

    def train_epoch(self, state, steps=None):
        """Run one epoch and return the updated state with its report

        Args:
            state (AgentState): state at epoch start; never modified
            steps (int, optional): rollout size, defaults to ppo.batch_size

        Returns:
            tuple: (AgentState, EpochReport)

        Raises:
            EpochAbortedError: on a non-finite loss or gradient; the caller keeps
                the epoch-start state
        """
        steps = int(steps or self.config.ppo.batch_size)
        epoch_index = state.epoch
        self.logger.info(f"Epoch {epoch_index + 1}: collecting {steps} steps")
        try:
            return self._run_epoch(state, steps)
        except (NonFiniteError, ShapeError, FloatingPointError) as e:
            self.logger.error(f"Epoch {epoch_index + 1} aborted, state rolled back: {e}")
            raise EpochAbortedError(f"epoch {epoch_index + 1} aborted: {e}", state=state) from e

    def _run_epoch(self, state, steps):
        ppo = self.config.ppo
        epoch_index = state.epoch
        buffer = self.collector.collect_rollout(state.snapshot(), steps, epoch=epoch_index)
        buffer = compute_advantages(buffer, ppo.gamma, ppo.gae_lambda)
        self.last_buffer = buffer
        windows = extract_windows(buffer, ppo.window_length)
        if windows.infeasible_count == 0:
            self.logger.warning(f"Epoch {epoch_index + 1}: no infeasible windows in the batch")

        stats = buffer.stats
        chosen = stats.selection()
        discounted_cost = float(np.mean(stats.discounted_costs[chosen]))
        scores = mlp_forward(state.validation, windows.observations)[:, 0]
        positive_validation = float(np.mean(np.maximum(scores, 0.0)))
        lagrange = update_multipliers(state.lagrange, discounted_cost, positive_validation)

        rng = make_rng(self.config.run.seed, SHUFFLE_STREAM, epoch_index)
        validation = state.validation
        validation_losses = []
        if self.mode == "lstc":
            for _ in range(ppo.validation_epochs):
                for idx in minibatches(len(windows), ppo.minibatch_size, rng):
                    loss, grads, _ = validation_loss(validation, windows.observations[idx], windows.feasible[idx])
                    validation = adam_step(validation, grads, ppo.validation_lr)
                    validation_losses.append(loss)
        if validation_losses:
            loss_b = float(np.mean(validation_losses))
        else:
            loss_b, _ = hinge_validation_loss(scores, windows.feasible)

        frozen_scores = mlp_forward(validation, windows.observations)[:, 0]
        policy, value, cost_value = state.policy, state.value, state.cost_value
        policy_losses, value_losses, cost_losses = [], [], []
        for _ in range(ppo.update_epochs):
            for idx in minibatches(len(buffer), ppo.minibatch_size, rng):
                result = lagrangian_objective(
                    policy, buffer.observations[idx], buffer.raw_actions[idx], buffer.log_probs[idx],
                    buffer.advantages[idx], buffer.cost_advantages[idx], frozen_scores[idx],
                    lagrange.lambda_long, lagrange.lambda_short, ppo.clip_eps, ppo.entropy_coef)
                policy = adam_step(policy, result.grads, ppo.policy_lr)
                (v_loss, v_grads), (c_loss, c_grads) = critic_losses(
                    value, cost_value, buffer.observations[idx], buffer.returns[idx], buffer.cost_returns[idx])
                value = adam_step(value, v_grads, ppo.value_lr)
                cost_value = adam_step(cost_value, c_grads, ppo.cost_value_lr)
                policy_losses.append(result.loss)
                value_losses.append(v_loss)
                cost_losses.append(c_loss)

        final = lagrangian_objective(
            policy, buffer.observations, buffer.raw_actions, buffer.log_probs, buffer.advantages,
            buffer.cost_advantages, frozen_scores, lagrange.lambda_long, lagrange.lambda_short, ppo.clip_eps)

        new_state = dataclasses.replace(state, policy=policy, value=value, cost_value=cost_value,
                                        validation=validation, lagrange=lagrange, epoch=epoch_index + 1,
                                        steps=state.steps + len(buffer))
        report = EpochReport(
            epoch=epoch_index + 1,
            steps=new_state.steps,
            ep_reward=float(np.mean(stats.rewards[chosen])),
            ep_cost=float(np.mean(stats.costs[chosen])),
            discounted_cost=discounted_cost,
            success_rate=float(np.mean(stats.successes[chosen])),
            feasible_rate=buffer.feasible_rate,
            positive_validation=positive_validation,
            lambda_l=lagrange.lambda_long,
            lambda_s=lagrange.lambda_short,
            loss_pi=float(np.mean(policy_losses)),
            loss_v=float(np.mean(value_losses)),
            loss_vc=float(np.mean(cost_losses)),
            loss_B=float(loss_b),
            entropy=gaussian_entropy(policy.log_std),
            approx_kl=final.approx_kl,
            clip_fraction=final.clip_fraction,
        )
        self._check_report(report)
        self.logger.info(
            f"Epoch {report.epoch} ({report.steps} steps): reward {report.ep_reward:.2f}, cost {report.ep_cost:.2f}, "
            f"success {report.success_rate:.2f}, feasible {report.feasible_rate:.3f}, "
            f"lambda_l {report.lambda_l:.4f}, lambda_s {report.lambda_s:.4f}, kl {report.approx_kl:.4f}")
        return new_state, report

    @staticmethod
    def _check_report(report):
        for item in dataclasses.fields(report):
            value = getattr(report, item.name)
            if isinstance(value, float) and not math.isfinite(value):
                raise NonFiniteError(f"non-finite {item.name} in epoch report", name=item.name)

    def train(self, state, total_steps, on_epoch=None):
        """Run epochs until total_steps environment steps have been collected

        The final epoch shrinks to fit the budget. on_epoch(state, report) is
        called after every epoch.

        Returns:
            tuple: (final AgentState, list of EpochReport)
        """
        reports = []
        batch = self.config.ppo.batch_size
        while state.steps < total_steps:
            state, report = self.train_epoch(state, min(batch, total_steps - state.steps))
            reports.append(report)
            if on_epoch is not None:
                on_epoch(state, report)
        return state, reports
