"""Shared controller interface and small navigation helpers."""

from __future__ import annotations

from collections import deque

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..observation import OBSTACLE, FovConfig, ObservationBuilder
from ..world import DISPLACEMENT, MOVE_ACTIONS, Action, GridWorld, valid_actions


def check_world(world) -> GridWorld:
    if not isinstance(world, GridWorld):
        raise TypeError(f"expected a GridWorld, got {type(world).__name__}")
    if world.nest is None:
        raise ValueError("world has no nest")
    return world


class Controller(BaseEstimator):
    """Maps the current world to one action per free agent.

    ``fit`` binds the controller to a fresh episode and resets private and
    team-shared state; ``predict`` returns ``{agent_id: Action | None}`` for
    every free agent, where None means stay in place. Decentralized
    controllers only look at each agent's observation window, the validity
    mask, and their own odometry.
    """

    centralized = False
    uses_pheromones = False

    def fit(self, world, field=None):
        check_world(world)
        self.rng_ = np.random.default_rng(getattr(self, "random_state", None))
        self.n_agents_ = len(world.agents)
        self._reset(world)
        return self

    def _reset(self, world):
        pass

    def predict(self, world, field=None):
        check_is_fitted(self, "n_agents_")
        if len(world.agents) != self.n_agents_:
            raise ValueError("world has a different team than the one the controller was fitted on")
        return self._decide(world, field)

    def _decide(self, world, field):
        raise NotImplementedError

    def on_wipeout(self):
        """Hook for scheduled pheromone wipeouts."""


class ObservingController(Controller):
    """Base for controllers that act from egocentric windows."""

    fov = 11

    def _decide(self, world, field):
        build = ObservationBuilder(world, field, FovConfig(self.fov))
        actions = {}
        for agent in world.agents:
            if agent.is_free:
                actions[agent.id] = self.act(agent.id, build(agent.id), valid_actions(world, agent.id), world)
        self._commit(world)
        return actions

    def act(self, agent_id, obs, mask, world):
        raise NotImplementedError

    def _commit(self, world):
        """Write team-shared state after every agent has decided."""


def window_distances(obs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """BFS distance inside the window from every walkable cell to ``targets``."""
    size = obs.shape[1]
    free = obs[OBSTACLE] == 0
    dist = np.full((size, size), np.inf)
    queue = deque()
    for r, c in np.argwhere(targets):
        dist[r, c] = 0
        queue.append((r, c))
    while queue:
        r, c = queue.popleft()
        d = dist[r, c] + 1
        for dr, dc in ((-1, 0), (1, 0), (0, 1), (0, -1)):
            nr, nc = r + dr, c + dc
            if 0 <= nr < size and 0 <= nc < size and free[nr, nc] and dist[nr, nc] > d:
                dist[nr, nc] = d
                queue.append((nr, nc))
    return dist


def descend(dist: np.ndarray, mask, rng, strict: bool = True):
    """Valid move to the neighbour with the smallest distance, seeded ties."""
    c = dist.shape[0] // 2
    best, choices = np.inf, []
    for a in MOVE_ACTIONS:
        if not mask[a]:
            continue
        dr, dc = DISPLACEMENT[a]
        d = dist[c + dr, c + dc]
        if d < best:
            best, choices = d, [a]
        elif d == best:
            choices.append(a)
    if not choices or not np.isfinite(best) or (strict and best >= dist[c, c]):
        return None
    return choices[int(rng.integers(len(choices)))] if len(choices) > 1 else choices[0]


def toward(vector, mask, rng):
    """Move reducing an integer (drow, dcol) vector, dominant component first."""
    dr, dc = vector
    ranked = []
    vertical = Action.NORTH if dr < 0 else Action.SOUTH
    horizontal = Action.WEST if dc < 0 else Action.EAST
    if abs(dr) >= abs(dc):
        ranked = [(vertical, dr), (horizontal, dc)]
    else:
        ranked = [(horizontal, dc), (vertical, dr)]
    for action, comp in ranked:
        if comp != 0 and mask[action]:
            return action
    return None


def random_move(mask, rng):
    moves = [a for a in MOVE_ACTIONS if mask[a]]
    if not moves:
        return None
    return moves[int(rng.integers(len(moves)))]
