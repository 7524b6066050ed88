"""Long-term and short-term Lagrange multipliers"""

import dataclasses
import logging
import math
from dataclasses import dataclass

from src.utils.errors import NonFiniteError

logger = logging.getLogger(__name__)

PROJECTED = "projected"
GATED = "gated"


@dataclass(frozen=True)
class LagrangeState:
    """Penalty weights and their dual-ascent settings

    lambda_long weighs the cost-advantage penalty, lambda_short the validation
    score penalty. A disabled multiplier stays pinned at 0.
    """
    lambda_long: float
    lambda_short: float
    lambda_long_lr: float
    lambda_short_lr: float
    cost_limit: float
    lambda_max: float = 100.0
    update_mode: str = PROJECTED
    long_enabled: bool = True
    short_enabled: bool = True

    @classmethod
    def from_config(cls, lagrange_config, mode="lstc"):
        """Initial multipliers for a run mode ('lstc', 'ppo-lag' or 'ppo')"""
        long_enabled = mode in ("lstc", "ppo-lag")
        short_enabled = mode == "lstc"
        return cls(
            lambda_long=lagrange_config.lambda_long_init if long_enabled else 0.0,
            lambda_short=lagrange_config.lambda_short_init if short_enabled else 0.0,
            lambda_long_lr=lagrange_config.lambda_long_lr,
            lambda_short_lr=lagrange_config.lambda_short_lr,
            cost_limit=lagrange_config.cost_limit,
            lambda_max=lagrange_config.lambda_max,
            update_mode=lagrange_config.update_mode,
            long_enabled=long_enabled,
            short_enabled=short_enabled,
        )


def _clip(value, upper):
    return min(max(value, 0.0), upper)


def update_multipliers(state, discounted_cost, positive_validation):
    """One dual-ascent step on both multipliers

    Projected mode: lambda_long += lr * (C - b) and lambda_short += lr * B+,
    each projected onto [0, lambda_max]; lambda_short decays by (1 - lr) when
    B+ is 0. Gated mode: each multiplier only increases, and only when its
    violation statistic is positive.

    Args:
        state (LagrangeState): current multipliers
        discounted_cost (float): mean discounted episode cost C of the epoch
        positive_validation (float): mean of max(B(window), 0) over anchors

    Returns:
        LagrangeState: updated multipliers

    Raises:
        NonFiniteError: when a statistic is NaN or infinite
    """
    if not math.isfinite(discounted_cost) or not math.isfinite(positive_validation):
        raise NonFiniteError(f"non-finite multiplier statistics (cost {discounted_cost}, "
                             f"validation {positive_validation})")
    long_violation = discounted_cost - state.cost_limit
    lambda_long, lambda_short = state.lambda_long, state.lambda_short

    if state.update_mode == GATED:
        if long_violation > 0.0:
            lambda_long = min(lambda_long + state.lambda_long_lr * long_violation, state.lambda_max)
        if positive_validation > 0.0:
            lambda_short = min(lambda_short + state.lambda_short_lr * positive_validation, state.lambda_max)
    else:
        lambda_long = _clip(lambda_long + state.lambda_long_lr * long_violation, state.lambda_max)
        lambda_short = _clip(lambda_short + state.lambda_short_lr * positive_validation, state.lambda_max)
        if positive_validation == 0.0:
            lambda_short = lambda_short * (1.0 - state.lambda_short_lr)

    if not state.long_enabled:
        lambda_long = 0.0
    if not state.short_enabled:
        lambda_short = 0.0
    logger.debug(f"Multipliers: lambda_l {state.lambda_long:.4f} -> {lambda_long:.4f}, "
                 f"lambda_s {state.lambda_short:.4f} -> {lambda_short:.4f}")
    return dataclasses.replace(state, lambda_long=lambda_long, lambda_short=lambda_short)
