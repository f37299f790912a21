"""Training-time action filtering and sampling."""

from __future__ import annotations

from enum import Enum

import numpy as np

from ..world import DISPLACEMENT, MOVE_ACTIONS, Action


class SampleMode(str, Enum):
    TRAIN = "train"
    TEST = "test"


def filter_toward(mask, vector) -> np.ndarray:
    """Drop moves whose displacement has a negative dot product with ``vector``.

    Falls back to the unfiltered mask when nothing would be left.
    """
    mask = np.asarray(mask, dtype=bool)
    out = mask.copy()
    for a in MOVE_ACTIONS:
        dr, dc = DISPLACEMENT[a]
        if dr * vector[0] + dc * vector[1] < 0:
            out[a] = False
    return out if out.any() else mask.copy()


def euclidean_action_filter(world, agent_id, mask) -> np.ndarray:
    """Stop loaded agents from stepping away from the nest center."""
    agent = world.agents[agent_id]
    if not agent.is_full:
        return np.asarray(mask, dtype=bool).copy()
    cr, cc = world.nest.center
    return filter_toward(mask, (cr - agent.pos[0], cc - agent.pos[1]))


def sample_action(probs, mask, mode=SampleMode.TRAIN, rng=None):
    """Return (enacted action or None, sampled action index).

    Training mode replaces an invalid sample with a uniform draw over the
    valid set (None when nothing is valid). Test mode enacts the sample and
    lets the world absorb it.
    """
    rng = np.random.default_rng(rng)
    probs = np.asarray(probs, dtype=np.float64)
    sampled = int(rng.choice(len(probs), p=probs / probs.sum()))
    if SampleMode(mode) is SampleMode.TEST:
        return Action(sampled), sampled
    mask = np.asarray(mask, dtype=bool)
    if mask[sampled]:
        return Action(sampled), sampled
    valid = np.flatnonzero(mask)
    if len(valid) == 0:
        return None, sampled
    return Action(int(valid[rng.integers(len(valid))])), sampled
