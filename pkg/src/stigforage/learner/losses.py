"""Rewards, returns, advantages and the three actor-critic losses.

Every loss returns its value together with the gradient w.r.t. the policy
logits or the value output, so the network only has to backpropagate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..world import Event
from .network import sequence_backward, sequence_forward, softmax

MOVE_PENALTY = -0.05
WRONG_QUEUE_PENALTY = -1.0
COMPLETION_REWARD = 10.0

REWARDS = {
    Event.MOVED: MOVE_PENALTY,
    Event.BLOCKED: MOVE_PENALTY,
    Event.STAYED: MOVE_PENALTY,
    Event.NO_QUEUE: MOVE_PENALTY,
    Event.QUEUED: MOVE_PENALTY,
    Event.RELEASED: MOVE_PENALTY,
    Event.JOINED: 0.0,
    Event.REJECTED_JOIN: WRONG_QUEUE_PENALTY,
    Event.HARVEST: COMPLETION_REWARD,
    Event.DEPOSIT: COMPLETION_REWARD,
}


def assign_reward(event: Event) -> float:
    return REWARDS[event]


def discounted_returns(rewards, gamma: float, bootstrap=0.0) -> np.ndarray:
    """R_t = r_t + gamma * R_{t+1}, seeded with ``bootstrap`` past the end.

    Works along axis 0, so (T,) and (T, B) inputs are both fine.
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must be in (0, 1)")
    rewards = np.asarray(rewards, dtype=np.float64)
    out = np.empty_like(rewards)
    running = np.asarray(bootstrap, dtype=np.float64)
    for t in range(len(rewards) - 1, -1, -1):
        running = rewards[t] + gamma * running
        out[t] = running
    return out


def advantages(rewards, values, gamma: float, bootstrap=0.0, n_steps=None) -> np.ndarray:
    """n-step advantage A_t = sum_{i<k} g^i r_{t+i} + g^k V_{t+k} - V_t.

    With ``n_steps=None`` k runs to the end of the batch (k = T - t) and
    V_T is ``bootstrap``. Inputs are constants: nothing here is differentiated.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    T = len(rewards)
    if n_steps is None or n_steps >= T:
        return discounted_returns(rewards, gamma, bootstrap) - values
    ext = np.concatenate([values, np.asarray(bootstrap, dtype=np.float64)[None] * np.ones_like(values[:1])])
    out = np.empty_like(values)
    for t in range(T):
        k = min(n_steps, T - t)
        acc = ext[t + k] * gamma**k
        for i in range(k):
            acc = acc + gamma**i * rewards[t + i]
        out[t] = acc - values[t]
    return out


def entropy(probs) -> np.ndarray:
    p = np.clip(probs, 1e-300, 1.0)
    return -(probs * np.log(p)).sum(axis=-1)


def value_loss(values, returns):
    """L_V = sum (V - R)^2 and dL_V/dV."""
    diff = np.asarray(values) - np.asarray(returns)
    return float((diff**2).sum()), 2.0 * diff


def policy_loss(logits, actions, adv, weights=None, entropy_weight=0.01):
    """L_pi = -sum log pi(a_t) A_t - sigma * sum H(pi_t).

    The entropy bonus lowers the loss, which is what drives exploration.
    ``weights`` zeroes steps without a decision (queued agents).
    """
    probs = softmax(logits)
    logp = np.log(np.clip(probs, 1e-300, 1.0))
    n = probs.shape[-1]
    weights = np.ones(actions.shape) if weights is None else np.asarray(weights, dtype=np.float64)
    onehot = np.eye(n)[actions]
    chosen = (logp * onehot).sum(-1)
    H = entropy(probs)
    loss = -(chosen * adv * weights).sum() - entropy_weight * (H * weights).sum()
    grad = -(adv * weights)[..., None] * (onehot - probs)
    grad += entropy_weight * weights[..., None] * probs * (logp + H[..., None])
    return float(loss), grad


def validity_loss(logits, invalid, weights=None):
    """L_valid = -sum over invalid actions of log(1 - pi(a))."""
    probs = softmax(logits)
    invalid = np.asarray(invalid, dtype=bool)
    if weights is not None:
        invalid = invalid & (np.asarray(weights)[..., None] > 0)
    rest = np.clip(1.0 - probs, 1e-12, None)
    loss = -(np.log(rest) * invalid).sum()
    # d/dz_j of -log(1 - p_a) = p_a (delta_aj - p_j) / (1 - p_a)
    coef = np.where(invalid, probs / rest, 0.0)
    grad = coef - probs * coef.sum(-1, keepdims=True)
    return float(loss), grad


@dataclass
class LossWeights:
    policy: float = 1.0
    value: float = 0.5
    valid: float = 0.5

    def __post_init__(self):
        if min(self.policy, self.value, self.valid) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class Batch:
    """Time-major rollout for the learning agents of one environment.

    obs (T, B, C, f, f); actions, rewards, decided (T, B); invalid (T, B, 5)
    marks actions outside the filtered validity mask; bootstrap (B,).
    """

    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    decided: np.ndarray
    invalid: np.ndarray
    bootstrap: np.ndarray


@dataclass
class LossReport:
    value: float
    policy: float
    valid: float
    total: float


def episode_gradients(params, spec, batch: Batch, gamma=0.95, entropy_weight=0.01, weights=LossWeights(),
                      n_steps=None):
    """Forward the whole batch, return (LossReport, gradient dict)."""
    logits, values, _, cache = sequence_forward(params, spec, batch.obs)
    adv = advantages(batch.rewards, values, gamma, batch.bootstrap, n_steps)
    returns = adv + values
    lv, dv = value_loss(values, returns)
    lp, dlp = policy_loss(logits, batch.actions, adv, batch.decided, entropy_weight)
    lval, dlval = validity_loss(logits, batch.invalid, batch.decided)
    total = weights.policy * lp + weights.value * lv + weights.valid * lval
    if not np.isfinite(total):
        raise FloatingPointError(f"non-finite loss: L_V={lv} L_pi={lp} L_valid={lval}")
    dlogits = weights.policy * dlp + weights.valid * dlval
    grads = sequence_backward(params, spec, cache, dlogits, weights.value * dv)
    bad = [k for k, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise FloatingPointError(f"non-finite gradient in {bad}")
    return LossReport(lv, lp, lval, total), grads


def episode_loss(params, spec, batch: Batch, gamma=0.95, entropy_weight=0.01, weights=LossWeights(),
                 n_steps=None, frozen_targets=None) -> float:
    """Scalar total loss with returns and advantages held fixed.

    ``frozen_targets`` = (adv, returns) lets a finite-difference check treat
    them as constants, matching the analytic gradient.
    """
    logits, values, _, _ = sequence_forward(params, spec, batch.obs)
    if frozen_targets is None:
        adv = advantages(batch.rewards, values, gamma, batch.bootstrap, n_steps)
        returns = adv + values
    else:
        adv, returns = frozen_targets
    lv, _ = value_loss(values, returns)
    lp, _ = policy_loss(logits, batch.actions, adv, batch.decided, entropy_weight)
    lval, _ = validity_loss(logits, batch.invalid, batch.decided)
    return weights.policy * lp + weights.value * lv + weights.valid * lval
