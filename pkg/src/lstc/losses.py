"""Policy, critic and validation-network losses with analytic gradients

Every function returns the minimized loss value together with gradients in
the MlpGrads layout, ready for adam_step.
"""

from dataclasses import dataclass

import numpy as np

from src.nn_core.gaussian import gaussian_entropy, gaussian_log_prob
from src.nn_core.mlp import add_log_std_grad, mlp_forward, mlp_gradient
from src.utils.errors import NonFiniteError, ShapeError


@dataclass(frozen=True)
class PolicyLossResult:
    loss: float
    grads: object
    surrogate: float
    approx_kl: float
    clip_fraction: float


def ppo_surrogate(ratio, advantage, clip_eps):
    """Mean of min(r * A, clip(r, 1 - eps, 1 + eps) * A)"""
    ratio = np.asarray(ratio, dtype=np.float64)
    advantage = np.asarray(advantage, dtype=np.float64)
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps)
    return float(np.mean(np.minimum(ratio * advantage, clipped * advantage)))


def penalized_advantages(advantages, cost_advantages, validation_scores, lambda_long, lambda_short):
    """G_t = A_t - lambda_l * A^c_t - lambda_s * B(window_t)

    Raises:
        NonFiniteError: naming the first non-finite index
    """
    weights = (np.asarray(advantages, dtype=np.float64)
               - lambda_long * np.asarray(cost_advantages, dtype=np.float64)
               - lambda_short * np.asarray(validation_scores, dtype=np.float64))
    bad = np.flatnonzero(~np.isfinite(weights))
    if bad.size:
        raise NonFiniteError(f"non-finite penalized advantage at index {bad[0]}", index=int(bad[0]))
    return weights


def clipped_policy_loss(policy, observations, raw_actions, old_log_probs, weights, clip_eps, entropy_coef=0.0):
    """Negative clipped surrogate for arbitrary per-step weights

    The loss is -mean(min(r * G, clip(r) * G)) - entropy_coef * H. Where the
    clipped branch is selected the gradient through r is zero.

    Args:
        policy (MlpParams): Gaussian policy with a log_std vector
        observations (numpy.ndarray): (B, obs_dim) states
        raw_actions (numpy.ndarray): (B, act_dim) pre-clip actions that were sampled
        old_log_probs (numpy.ndarray): (B,) log-probabilities under the sampling policy
        weights (numpy.ndarray): (B,) advantage weights G
        clip_eps (float): ratio clip range
        entropy_coef (float): entropy bonus coefficient

    Returns:
        PolicyLossResult: loss, gradients and ratio diagnostics
    """
    weights = np.asarray(weights, dtype=np.float64)
    batch = weights.shape[0]
    if batch == 0:
        raise ShapeError("policy loss batch is empty")
    mean = mlp_forward(policy, observations)
    log_std = policy.log_std
    std = np.exp(log_std)
    log_probs = gaussian_log_prob(mean, log_std, raw_actions)
    log_ratio = log_probs - np.asarray(old_log_probs, dtype=np.float64)
    ratio = np.exp(log_ratio)

    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps)
    unclipped_term = ratio * weights
    clipped_term = clipped * weights
    objective = np.minimum(unclipped_term, clipped_term)
    entropy = gaussian_entropy(log_std)
    loss = -float(np.mean(objective)) - entropy_coef * entropy
    if not np.isfinite(loss):
        bad = int(np.flatnonzero(~np.isfinite(objective))[0]) if np.any(~np.isfinite(objective)) else None
        raise NonFiniteError(f"non-finite policy loss (index {bad})", index=bad)

    active = unclipped_term <= clipped_term
    d_ratio = np.where(active, weights, 0.0) * ratio
    z = (np.asarray(raw_actions, dtype=np.float64) - mean) / std
    upstream = -d_ratio[:, None] * z / std
    grads = mlp_gradient(policy, observations, upstream)
    log_std_grad = -np.mean(d_ratio[:, None] * (z * z - 1.0), axis=0) - entropy_coef * np.ones_like(log_std)
    grads = add_log_std_grad(grads, log_std_grad)

    return PolicyLossResult(
        loss=loss,
        grads=grads,
        surrogate=float(np.mean(objective)),
        approx_kl=float(np.mean(-log_ratio)),
        clip_fraction=float(np.mean(np.abs(ratio - 1.0) > clip_eps)),
    )


def ppo_policy_loss(policy, observations, raw_actions, old_log_probs, advantages, clip_eps, entropy_coef=0.0):
    """Plain clipped PPO loss on reward advantages"""
    return clipped_policy_loss(policy, observations, raw_actions, old_log_probs, advantages, clip_eps, entropy_coef)


def lagrangian_objective(policy, observations, raw_actions, old_log_probs, advantages, cost_advantages,
                         validation_scores, lambda_long, lambda_short, clip_eps, entropy_coef=0.0):
    """Clipped surrogate on the doubly penalized advantage G

    validation_scores come from a frozen validation network, so only policy
    gradients are returned.
    """
    weights = penalized_advantages(advantages, cost_advantages, validation_scores, lambda_long, lambda_short)
    return clipped_policy_loss(policy, observations, raw_actions, old_log_probs, weights, clip_eps, entropy_coef)


def critic_loss(params, observations, targets):
    """Mean squared error between predictions and return targets

    Returns:
        tuple: (loss, MlpGrads)
    """
    targets = np.asarray(targets, dtype=np.float64)
    predictions = mlp_forward(params, observations)[:, 0]
    residual = predictions - targets
    loss = float(np.mean(residual * residual))
    if not np.isfinite(loss):
        raise NonFiniteError("non-finite critic loss")
    return loss, mlp_gradient(params, observations, 2.0 * residual[:, None])


def critic_losses(value, cost_value, observations, returns, cost_returns):
    """Reward and cost critic losses with their gradients

    Returns:
        tuple: ((value_loss, value_grads), (cost_value_loss, cost_value_grads))
    """
    return critic_loss(value, observations, returns), critic_loss(cost_value, observations, cost_returns)


def hinge_validation_loss(scores, feasible):
    """Mean max(B, 0) over feasible windows plus mean max(-B, 0) over infeasible ones

    Either term is 0 when its class is absent.

    Returns:
        tuple: (loss, dL/dB per window)
    """
    scores = np.asarray(scores, dtype=np.float64)
    feasible = np.asarray(feasible, dtype=bool)
    infeasible = ~feasible
    n_feasible = int(np.count_nonzero(feasible))
    n_infeasible = int(np.count_nonzero(infeasible))
    loss = 0.0
    grad = np.zeros_like(scores)
    if n_feasible:
        loss += float(np.sum(np.maximum(scores[feasible], 0.0))) / n_feasible
        grad[feasible] = (scores[feasible] > 0.0) / n_feasible
    if n_infeasible:
        loss += float(np.sum(np.maximum(-scores[infeasible], 0.0))) / n_infeasible
        grad[infeasible] = -((scores[infeasible] < 0.0) / n_infeasible)
    return loss, grad


def validation_loss(validation, window_observations, feasible):
    """Hinge loss of the validation network on a window batch

    Returns:
        tuple: (loss, MlpGrads, scores)
    """
    scores = mlp_forward(validation, window_observations)[:, 0]
    loss, d_scores = hinge_validation_loss(scores, feasible)
    if not np.isfinite(loss):
        raise NonFiniteError("non-finite validation loss")
    upstream = scores.shape[0] * d_scores[:, None]
    return loss, mlp_gradient(validation, window_observations, upstream), scores
