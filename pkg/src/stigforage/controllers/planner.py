"""Centralized upper-bound planner with full observability.

Targets are handed out greedily by estimated arrival time; each agent then
follows its own A* path. Agents are not obstacles for planning; collisions
are resolved by the world and retried.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..world import DISPLACEMENT, MOVE_ACTIONS, Action, interaction_steps, valid_actions
from .base import Controller, random_move


class Unreachable(Exception):
    pass


def shortest_path(world, start, goal):
    """A* on the 4-connected walkable grid with unit costs.

    Returns the cell list from ``start`` to ``goal`` inclusive. The heap key
    is (f, g-descending, row, col) so expansion order is deterministic.
    """
    start, goal = tuple(start), tuple(goal)
    for cell in (start, goal):
        if not world.is_walkable(cell):
            raise ValueError(f"{cell} is not walkable")
    if start == goal:
        return [start]

    def h(cell):
        return abs(cell[0] - goal[0]) + abs(cell[1] - goal[1])

    walkable = world.walkable_mask()
    rows, cols = walkable.shape
    g = {start: 0}
    parent = {}
    heap = [(h(start), 0, start)]
    closed = set()
    while heap:
        _, neg_g, cell = heapq.heappop(heap)
        if cell in closed:
            continue
        if cell == goal:
            path = [cell]
            while cell in parent:
                cell = parent[cell]
                path.append(cell)
            return path[::-1]
        closed.add(cell)
        gc = -neg_g
        r, c = cell
        for nb in ((r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c)):
            if 0 <= nb[0] < rows and 0 <= nb[1] < cols and walkable[nb] and nb not in closed:
                ng = gc + 1
                if ng < g.get(nb, math.inf):
                    g[nb] = ng
                    parent[nb] = cell
                    heapq.heappush(heap, (ng + h(nb), -ng, nb))
    raise Unreachable(f"no path from {start} to {goal}")


def distance_field(world, source) -> np.ndarray:
    """BFS step counts from ``source`` to every walkable cell (inf elsewhere)."""
    walkable = world.walkable_mask()
    dist = np.full(walkable.shape, np.inf)
    dist[source] = 0
    queue = deque([tuple(source)])
    rows, cols = walkable.shape
    while queue:
        r, c = queue.popleft()
        d = dist[r, c] + 1
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < rows and 0 <= nc < cols and walkable[nr, nc] and dist[nr, nc] > d:
                dist[nr, nc] = d
                queue.append((nr, nc))
    return dist


def _target_key(target):
    return (target.kind, target.id)


@dataclass
class Assignment:
    targets: dict = field(default_factory=dict)  # agent-id -> ResourceNode | Cache
    paths: dict = field(default_factory=dict)  # agent-id -> list of cells


def _join_distance(dist_to_entry: np.ndarray, pos) -> float:
    """Steps until the agent stands on or next to the entry."""
    return max(dist_to_entry[pos] - 1, 0)


def greedy_allocate(world, agents=None, assignment=None, distances=None, queue_aware=True) -> Assignment:
    """Commit (agent, target) pairs in order of estimated arrival time.

    Arrival estimate = steps to reach the target's entry + expected wait,
    where the wait counts agents already queued or assigned to that target
    times the interaction duration. Finite resources offer ``ceil(remaining)``
    slots, shared between queued and assigned agents. With
    ``queue_aware=False`` the estimate is pure distance.
    """
    assignment = assignment or Assignment()
    distances = distances if distances is not None else {}
    if agents is None:
        agents = [a for a in world.agents if a.is_free and a.id not in assignment.targets]

    load = {}  # target key -> agents queued or assigned
    for node in world.resources.values():
        load[_target_key(node)] = len(node.queue)
    for cache in world.nest.caches:
        load[_target_key(cache)] = len(cache.queue)
    for target in assignment.targets.values():
        load[_target_key(target)] = load.get(_target_key(target), 0) + 1

    def dist(target):
        key = _target_key(target)
        if key not in distances:
            distances[key] = distance_field(world, target.entry_cell)
        return distances[key]

    gather, drop = interaction_steps(world.gather_rate), interaction_steps(world.dropoff_rate)
    pending = {a.id: a for a in agents}
    while pending:
        best = None
        for aid in sorted(pending):
            agent = pending[aid]
            if agent.is_full:
                options, duration = world.nest.caches, drop
            else:
                options, duration = [n for n in world.resources.values() if not n.depleted], gather
            for target in options:
                key = _target_key(target)
                if target.kind == "resource" and target.remaining is not None:
                    if load[key] >= math.ceil(target.remaining):
                        continue
                d = _join_distance(dist(target), agent.pos)
                if not np.isfinite(d):
                    continue
                cost = d + (load[key] * duration if queue_aware else 0)
                cand = (cost, aid, key)
                if best is None or cand < best[0]:
                    best = (cand, agent, target)
        if best is None:
            break
        _, agent, target = best
        assignment.targets[agent.id] = target
        assignment.paths.pop(agent.id, None)
        load[_target_key(target)] += 1
        del pending[agent.id]
    return assignment


class CentralPlanner(Controller):
    """Greedy allocation plus per-agent A* path following.

    Reallocation is event driven: an agent re-enters the pool when it leaves
    a queue, when its target depletes, or when its path is cut off.
    """

    centralized = True

    def __init__(self, queue_aware=True, patience=2, random_state=None):
        self.queue_aware = queue_aware
        self.patience = patience
        self.random_state = random_state

    def _reset(self, world):
        self.assignment_ = Assignment()
        self._distances = {}
        self._blocked = {}
        self._resource_ids = set(world.resources)

    def _invalidate(self, world):
        ids = set(world.resources)
        if ids != self._resource_ids:
            self._distances = {}
            self._resource_ids = ids
        for aid, target in list(self.assignment_.targets.items()):
            agent = world.agents[aid]
            stale = (
                not agent.is_free
                or (target.kind == "resource" and (target.depleted or target.id not in world.resources))
                or (target.kind == "resource") == agent.is_full
            )
            if stale:
                del self.assignment_.targets[aid]
                self.assignment_.paths.pop(aid, None)

    def _decide(self, world, field):
        self._invalidate(world)
        greedy_allocate(world, assignment=self.assignment_, distances=self._distances, queue_aware=self.queue_aware)
        actions = {}
        for agent in world.agents:
            if agent.is_free:
                actions[agent.id] = self._next_action(world, agent)
        self._resolve_head_on(world, actions)
        return actions

    def _resolve_head_on(self, world, actions):
        """Two agents trying to swap cells: the one with lower priority
        (empty-handed, then higher id) steps aside to its cheapest free
        neighbour so the other can pass."""

        def aim(aid):
            a = actions.get(aid)
            if a not in MOVE_ACTIONS:
                return None
            pos = world.agents[aid].pos
            dr, dc = DISPLACEMENT[a]
            return (pos[0] + dr, pos[1] + dc)

        handled = set()
        for aid in sorted(actions):
            cell = aim(aid)
            if cell is None or aid in handled or not world.in_bounds(cell):
                continue
            other = int(world.occupancy[cell])
            if other < 0 or other in handled or aim(other) != tuple(world.agents[aid].pos):
                continue
            a, b = world.agents[aid], world.agents[other]
            yielder, passer = (b, a) if (a.is_full, -a.id) > (b.is_full, -b.id) else (a, b)
            handled |= {aid, other}
            self._blocked[passer.id] = 0
            self.assignment_.paths.pop(yielder.id, None)
            actions[yielder.id] = self._step_aside(world, yielder)

    def _step_aside(self, world, agent):
        mask = valid_actions(world, agent.id)
        target = self.assignment_.targets.get(agent.id)
        dist = self._distance_to(world, target) if target is not None else None
        best = None
        for a in MOVE_ACTIONS:
            if not mask[a]:
                continue
            dr, dc = DISPLACEMENT[a]
            cell = (agent.pos[0] + dr, agent.pos[1] + dc)
            cost = dist[cell] if dist is not None else 0
            if best is None or cost < best[0]:
                best = (cost, a)
        return None if best is None else best[1]

    def _distance_to(self, world, target):
        key = _target_key(target)
        if key not in self._distances:
            self._distances[key] = distance_field(world, target.entry_cell)
        return self._distances[key]

    def _next_action(self, world, agent):
        mask = valid_actions(world, agent.id)
        target = self.assignment_.targets.get(agent.id)
        if target is None:
            return None
        # JOIN enters the first compatible queue in reach, which may not be
        # ours when two entries are close; then keep walking to our entry.
        if mask[Action.JOIN] and world.join_target(agent.id) is target:
            return Action.JOIN
        path = self.assignment_.paths.get(agent.id)
        if path and agent.pos in path:
            path = path[path.index(agent.pos) :]
        else:
            try:
                path = shortest_path(world, agent.pos, target.entry_cell)
            except Unreachable:
                del self.assignment_.targets[agent.id]
                return None
        self.assignment_.paths[agent.id] = path
        if len(path) < 2:
            return None

        # Any free neighbour one step closer is also on a shortest path, so a
        # blocked agent can swerve without losing optimality.
        dist = self._distance_to(world, target)
        here = dist[agent.pos]
        preferred = path[1]
        options = []
        for a in MOVE_ACTIONS:
            dr, dc = DISPLACEMENT[a]
            cell = (agent.pos[0] + dr, agent.pos[1] + dc)
            if mask[a] and world.in_bounds(cell) and dist[cell] == here - 1:
                options.append((cell != preferred, a))
        if options:
            self._blocked[agent.id] = 0
            return min(options)[1]
        self._blocked[agent.id] = self._blocked.get(agent.id, 0) + 1
        if self._blocked[agent.id] >= self.patience:
            # Break head-on deadlocks with a random sidestep.
            self._blocked[agent.id] = 0
            self.assignment_.paths.pop(agent.id, None)
            return random_move(mask, self.rng_)
        step = (preferred[0] - agent.pos[0], preferred[1] - agent.pos[1])
        return next(a for a in MOVE_ACTIONS if DISPLACEMENT[a] == step)


def planner_step(world, assignment: Assignment):
    """Stateless variant: one action per assigned free agent along its path."""
    actions = {}
    for aid, target in assignment.targets.items():
        agent = world.agents[aid]
        if not agent.is_free:
            continue
        if valid_actions(world, aid)[Action.JOIN] and world.join_target(aid) is target:
            actions[aid] = Action.JOIN
            continue
        path = assignment.paths.get(aid)
        if not path or agent.pos not in path:
            path = shortest_path(world, agent.pos, target.entry_cell)
            assignment.paths[aid] = path
        path = path[path.index(agent.pos) :]
        assignment.paths[aid] = path
        if len(path) < 2:
            actions[aid] = None
            continue
        step = (path[1][0] - agent.pos[0], path[1][1] - agent.pos[1])
        actions[aid] = next(a for a in MOVE_ACTIONS if DISPLACEMENT[a] == step)
    return actions
