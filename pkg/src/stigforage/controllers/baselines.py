"""Scripted decentralized controllers.

``CSAF11`` and ``CardinalityMR`` are "-like" reimplementations built from
short published descriptions, not bit-faithful ports.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from ..observation import CACHE_ENTRY, LOADS, NEST, PHEROMONE, RESOURCE, RESOURCE_ENTRY
from ..world import DISPLACEMENT, MOVE_ACTIONS, Action, CellKind
from .base import ObservingController, descend, random_move, toward, window_distances


class Odometry:
    """Integer displacement to the nest, integrated from the agent's own moves."""

    def __init__(self, world):
        origin = world.nest.origin
        self.home = {a.id: (origin[0] - a.pos[0], origin[1] - a.pos[1]) for a in world.agents}
        self.last = {a.id: a.pos for a in world.agents}

    def update(self, agent):
        lr, lc = self.last[agent.id]
        dr, dc = agent.pos[0] - lr, agent.pos[1] - lc
        hr, hc = self.home[agent.id]
        self.home[agent.id] = (hr - dr, hc - dc)
        self.last[agent.id] = agent.pos
        return self.home[agent.id]


def _carrying(obs) -> bool:
    c = obs.shape[1] // 2
    return obs[LOADS, c, c] > 0


def _go_to_visible(obs, channel, mask, rng):
    if not obs[channel].any():
        return None
    return descend(window_distances(obs, obs[channel] > 0), mask, rng)


class Mode(Enum):
    SEARCH = "search"
    RETURN = "return"


@dataclass
class CsafState:
    mode: Mode = Mode.SEARCH
    home: tuple = (0, 0)


class CSAF11(ObservingController):
    """Coverage-marking search with odometry-guided return and an 11x11 view.

    Searching agents head for any visible resource entry, otherwise step
    toward the side of their window with the fewest team coverage marks.
    Carriers follow their home vector until a cache entry is in view.
    """

    uses_pheromones = True

    def __init__(self, fov=11, wipeout_clears_coverage=True, random_state=None):
        self.fov = fov
        self.wipeout_clears_coverage = wipeout_clears_coverage
        self.random_state = random_state

    def _reset(self, world):
        self.coverage_ = np.zeros((world.height, world.width), dtype=np.int64)
        self.odometry_ = Odometry(world)
        self.states_ = {a.id: CsafState(home=self.odometry_.home[a.id]) for a in world.agents}
        self._marks = []

    def on_wipeout(self):
        if self.wipeout_clears_coverage:
            self.coverage_[:] = 0

    def act(self, agent_id, obs, mask, world):
        agent = world.agents[agent_id]
        state = self.states_[agent_id]
        state.home = self.odometry_.update(agent)
        state.mode = Mode.RETURN if _carrying(obs) else Mode.SEARCH
        self._marks.append(agent.pos)
        return csaf11_step(obs, state, mask, self._window_coverage(agent.pos), self.rng_)

    def _window_coverage(self, pos):
        r = self.fov // 2
        padded = np.pad(self.coverage_, r, constant_values=1)
        return padded[pos[0] : pos[0] + self.fov, pos[1] : pos[1] + self.fov]

    def _commit(self, world):
        for cell in self._marks:
            self.coverage_[cell] += 1
        self._marks = []


def csaf11_step(obs, state: CsafState, mask, coverage, rng) -> Optional[Action]:
    if mask[Action.JOIN]:
        return Action.JOIN
    if state.mode is Mode.RETURN:
        action = _go_to_visible(obs, CACHE_ENTRY, mask, rng)
        if action is None:
            action = toward(state.home, mask, rng)
        return action if action is not None else random_move(mask, rng)

    action = _go_to_visible(obs, RESOURCE_ENTRY, mask, rng)
    if action is not None:
        return action
    c = coverage.shape[0] // 2
    halves = {
        Action.NORTH: coverage[:c, :],
        Action.SOUTH: coverage[c + 1 :, :],
        Action.EAST: coverage[:, c + 1 :],
        Action.WEST: coverage[:, :c],
    }
    scores = {a: int(halves[a].sum()) for a in MOVE_ACTIONS if mask[a]}
    if not scores:
        return None
    low = min(scores.values())
    best = [a for a, s in scores.items() if s == low]
    return best[int(rng.integers(len(best)))]


@dataclass
class BeaconState:
    is_beacon: bool = False
    nest_hops: Optional[int] = None
    food_hops: Optional[int] = None


class CardinalityMR(ObservingController):
    """Agents turn into stationary relays that broadcast hop counts.

    An empty walker that sees fewer than ``min_beacons`` beacons becomes one
    and never moves again. Beacon hop counts relay one hop per step. Walkers
    descend the food gradient when empty and the nest gradient when full.
    Conversions take effect immediately so that agents deciding later in the
    same step already see the new beacon.
    """

    def __init__(self, fov=11, min_beacons=2, random_state=None):
        self.fov = fov
        self.min_beacons = min_beacons
        self.random_state = random_state

    def _reset(self, world):
        self.beacons_ = {}
        self.last_move_ = {}

    @property
    def beacon_count(self):
        return len(self.beacons_)

    def _visible_beacons(self, pos, world):
        r = self.fov // 2
        out = []
        for bid, state in self.beacons_.items():
            bpos = world.agents[bid].pos
            if max(abs(bpos[0] - pos[0]), abs(bpos[1] - pos[1])) <= r:
                out.append((bid, bpos, state))
        return out

    def act(self, agent_id, obs, mask, world):
        if agent_id in self.beacons_:
            return None
        agent = world.agents[agent_id]
        visible = self._visible_beacons(agent.pos, world)
        on_entry = world.kind[agent.pos] != CellKind.EMPTY
        if not _carrying(obs) and len(visible) < self.min_beacons and not on_entry:
            self.beacons_[agent_id] = BeaconState(is_beacon=True)
            return None
        action = cardinality_mr_step(obs, agent.pos, visible, mask, self.last_move_.get(agent_id), self.rng_)
        if action in MOVE_ACTIONS:
            self.last_move_[agent_id] = action
        return action

    def _commit(self, world):
        r = self.fov // 2
        nest_cells = [c.entry_cell for c in world.nest.caches] + world.nest.cells
        food_cells = [n.entry_cell for n in world.resources.values() if not n.depleted]
        snapshot = {bid: (s.nest_hops, s.food_hops) for bid, s in self.beacons_.items()}

        def near(a, b):
            return max(abs(a[0] - b[0]), abs(a[1] - b[1])) <= r

        for bid, state in self.beacons_.items():
            pos = world.agents[bid].pos
            peers = [snapshot[o] for o in snapshot if o != bid and near(pos, world.agents[o].pos)]
            for idx, attr, cells in ((0, "nest_hops", nest_cells), (1, "food_hops", food_cells)):
                if any(near(pos, cell) for cell in cells):
                    setattr(state, attr, 0)
                    continue
                known = [p[idx] for p in peers if p[idx] is not None]
                setattr(state, attr, 1 + min(known) if known else None)


def cardinality_mr_step(obs, pos, visible_beacons, mask, last_move, rng) -> Optional[Action]:
    """One walker decision; ``visible_beacons`` is [(id, position, BeaconState)]."""
    if mask[Action.JOIN]:
        return Action.JOIN
    full = _carrying(obs)
    action = _go_to_visible(obs, CACHE_ENTRY if full else RESOURCE_ENTRY, mask, rng)
    if action is not None:
        return action
    attr = "nest_hops" if full else "food_hops"
    known = [(getattr(s, attr), bid, bpos) for bid, bpos, s in visible_beacons if getattr(s, attr) is not None]
    if known:
        _, _, bpos = min(known)
        vec = (bpos[0] - pos[0], bpos[1] - pos[1])
        if max(abs(vec[0]), abs(vec[1])) > 1:
            action = toward(vec, mask, rng)
            if action is not None:
                return action
    if last_move is not None and mask[last_move] and rng.random() < 0.8:
        return last_move
    return random_move(mask, rng)


class GradientFollower(ObservingController):
    """Empty agents climb the sensed trail; carriers use odometry to get home."""

    uses_pheromones = True

    def __init__(self, fov=11, random_state=None):
        self.fov = fov
        self.random_state = random_state

    def _reset(self, world):
        self.odometry_ = Odometry(world)

    def act(self, agent_id, obs, mask, world):
        home = self.odometry_.update(world.agents[agent_id])
        return gradient_follower_step(obs, home, mask, self.rng_)


def gradient_follower_step(obs, home, mask, rng) -> Optional[Action]:
    if mask[Action.JOIN]:
        return Action.JOIN
    if _carrying(obs):
        action = _go_to_visible(obs, CACHE_ENTRY, mask, rng)
        if action is None:
            action = toward(home, mask, rng)
        return action if action is not None else random_move(mask, rng)
    c = obs.shape[1] // 2
    sensed = {}
    for a in MOVE_ACTIONS:
        if mask[a]:
            dr, dc = DISPLACEMENT[a]
            sensed[a] = obs[PHEROMONE, c + dr, c + dc]
    if sensed and max(sensed.values()) > 0:
        top = max(sensed.values())
        best = [a for a, v in sensed.items() if v == top]
        return best[int(rng.integers(len(best)))]
    return random_move(mask, rng)


class RandomWalk(ObservingController):
    """Lower-bound control: join whenever possible, otherwise a uniform valid move."""

    def __init__(self, random_state=None):
        self.random_state = random_state

    fov = 3

    def act(self, agent_id, obs, mask, world):
        return random_walk_step(mask, self.rng_)


def random_walk_step(mask, rng) -> Optional[Action]:
    if mask[Action.JOIN]:
        return Action.JOIN
    return random_move(mask, rng)
