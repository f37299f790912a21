"""Grid world for multi-agent foraging.

The world owns terrain, resources, the central nest with its four caches,
agents, and the queue-and-rate interaction mechanics. Everything that is
random is drawn from streams derived from ``WorldConfig.rng_seed`` so that a
config plus a seed fully determines a run.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import ndimage

# Stream indices for SeedSequence spawn keys.
_PLACEMENT_STREAM = 0
_STEP_STREAM = 1
_RESPAWN_STREAM = 2

RESERVED_RING = 2


class PlacementError(RuntimeError):
    """The requested entities do not fit into the world."""


class Action(IntEnum):
    NORTH = 0
    SOUTH = 1
    EAST = 2
    WEST = 3
    JOIN = 4


MOVE_ACTIONS = (Action.NORTH, Action.SOUTH, Action.EAST, Action.WEST)
DISPLACEMENT = {
    Action.NORTH: (-1, 0),
    Action.SOUTH: (1, 0),
    Action.EAST: (0, 1),
    Action.WEST: (0, -1),
}
N_ACTIONS = len(Action)


class CellKind(IntEnum):
    EMPTY = 0
    OBSTACLE = 1
    RESOURCE = 2
    NEST = 3
    RESOURCE_ENTRY = 4
    CACHE_ENTRY = 5


WALKABLE_KINDS = (CellKind.EMPTY, CellKind.RESOURCE_ENTRY, CellKind.CACHE_ENTRY)


class Status(Enum):
    FREE = "free"
    QUEUED = "queued"
    INTERACTING = "interacting"


class Event(Enum):
    """What happened to one agent during one world step."""

    MOVED = "moved"
    BLOCKED = "blocked"
    STAYED = "stayed"
    JOINED = "joined"
    REJECTED_JOIN = "rejected-join"
    NO_QUEUE = "no-queue"
    QUEUED = "queued"
    HARVEST = "harvest-complete"
    DEPOSIT = "deposit-complete"
    RELEASED = "released"


@dataclass
class WorldConfig:
    width: int = 32
    height: int = 32
    obstacle_density: float = 0.0
    num_resources: int = 4
    resource_capacity: Optional[int] = None  # None means infinite
    gather_rate: float = 1.0
    dropoff_rate: float = 1.0
    respawn_on_depletion: bool = False
    rng_seed: int = 0
    num_agents: int = 16
    # Chebyshev distance bound from the nest block; None places anywhere.
    resource_radius: Optional[int] = None

    def validate(self):
        if self.width < 12 or self.height < 12:
            raise ValueError("world must be at least 12x12")
        if not 0.0 <= self.obstacle_density <= 0.5:
            raise ValueError("obstacle_density must lie in [0, 0.5]")
        for name in ("gather_rate", "dropoff_rate"):
            rate = getattr(self, name)
            if not 0.0 < rate <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.num_resources < 1:
            raise ValueError("num_resources must be >= 1")
        if self.resource_capacity is not None and self.resource_capacity <= 0:
            raise ValueError("resource_capacity must be positive or None")
        if self.num_agents < 0:
            raise ValueError("num_agents must be >= 0")


def as_fraction(x) -> Fraction:
    """Exact rational for a decimal rate such as 0.1 or 0.25."""
    if isinstance(x, Fraction):
        return x
    return Fraction(str(x)).limit_denominator(10**9)


def interaction_steps(rate) -> int:
    """Interaction steps needed to fill or empty a one-unit load."""
    return math.ceil(1 / as_fraction(rate))


@dataclass
class ResourceNode:
    id: int
    body_cell: tuple
    entry_cell: tuple
    remaining: Optional[Fraction]  # None means infinite
    queue: deque = field(default_factory=deque)
    harvests: int = 0

    kind = "resource"

    @property
    def depleted(self) -> bool:
        return self.remaining is not None and self.remaining <= 0


@dataclass
class Cache:
    id: int
    entry_cell: tuple
    queue: deque = field(default_factory=deque)

    kind = "cache"


@dataclass
class NestNode:
    origin: tuple  # top-left cell of the 2x2 block
    caches: list
    total_deposited: int = 0
    units_received: Fraction = Fraction(0)

    @property
    def cells(self):
        r, c = self.origin
        return [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)]

    @property
    def center(self):
        r, c = self.origin
        return (r + 0.5, c + 0.5)


@dataclass
class AgentState:
    id: int
    pos: tuple
    load: Fraction = Fraction(0)
    status: Status = Status.FREE
    target: object = None
    harvest_step: Optional[int] = None
    joined_step: Optional[int] = None

    @property
    def is_free(self) -> bool:
        return self.status is Status.FREE

    @property
    def is_full(self) -> bool:
        # Partial loads route like full ones.
        return self.load > 0

    def steps_remaining(self, world) -> Optional[int]:
        if self.status is not Status.INTERACTING:
            return None
        if self.target.kind == "resource":
            return math.ceil((1 - self.load) / world.gather_rate)
        return math.ceil(self.load / world.dropoff_rate)


@dataclass
class StepOutcome:
    step: int
    order: list
    events: dict
    completions: list

    def count(self, kind: Event) -> int:
        return sum(1 for e in self.events.values() if e is kind)


def _stream(seed: int, key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


class GridWorld:
    """Mutable world state; single writer per instance."""

    def __init__(self, config: WorldConfig, height=None, width=None):
        self.config = config
        self.height = height or config.height
        self.width = width or config.width
        self.kind = np.zeros((self.height, self.width), dtype=np.int8)
        self.target_id = np.full((self.height, self.width), -1, dtype=np.int32)
        self.occupancy = np.full((self.height, self.width), -1, dtype=np.int32)
        self.resources: dict = {}
        self.nest: Optional[NestNode] = None
        self.agents: list = []
        self.clock = 0
        self.gather_rate = as_fraction(config.gather_rate)
        self.dropoff_rate = as_fraction(config.dropoff_rate)
        self.total_gathered = Fraction(0)
        self.next_resource_id = 0
        self._retired_harvests = 0
        self._step_rng = _stream(config.rng_seed, _STEP_STREAM)
        self._respawn_rng = _stream(config.rng_seed, _RESPAWN_STREAM)

    # -- geometry ---------------------------------------------------------

    def in_bounds(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def is_walkable(self, cell) -> bool:
        return self.in_bounds(cell) and self.kind[cell] in WALKABLE_KINDS

    def walkable_mask(self) -> np.ndarray:
        return np.isin(self.kind, WALKABLE_KINDS)

    def neighbors4(self, cell):
        r, c = cell
        for dr, dc in ((-1, 0), (1, 0), (0, 1), (0, -1)):
            nb = (r + dr, c + dc)
            if self.in_bounds(nb):
                yield nb

    # -- entity bookkeeping -----------------------------------------------

    def _set_nest(self, origin):
        r, c = origin
        for cell in [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)]:
            self.kind[cell] = CellKind.NEST
        entries = [(r - 1, c), (r, c + 2), (r + 2, c + 1), (r + 1, c - 1)]
        caches = []
        for i, cell in enumerate(entries):
            self.kind[cell] = CellKind.CACHE_ENTRY
            self.target_id[cell] = i
            caches.append(Cache(id=i, entry_cell=cell))
        self.nest = NestNode(origin=origin, caches=caches)

    def add_resource(self, body, entry, remaining="default", rid=None) -> ResourceNode:
        if remaining == "default":
            cap = self.config.resource_capacity
            remaining = None if cap is None else Fraction(cap)
        if rid is None:
            rid = self.next_resource_id
        self.next_resource_id = max(self.next_resource_id, rid + 1)
        node = ResourceNode(id=rid, body_cell=tuple(body), entry_cell=tuple(entry), remaining=remaining)
        self.kind[node.body_cell] = CellKind.RESOURCE
        self.kind[node.entry_cell] = CellKind.RESOURCE_ENTRY
        self.target_id[node.body_cell] = rid
        self.target_id[node.entry_cell] = rid
        self.resources[rid] = node
        return node

    def remove_resource(self, rid):
        node = self.resources.pop(rid)
        for cell in (node.body_cell, node.entry_cell):
            self.kind[cell] = CellKind.EMPTY
            self.target_id[cell] = -1

    def add_agent(self, pos, load=0) -> AgentState:
        pos = tuple(pos)
        if not self.is_walkable(pos) or self.occupancy[pos] >= 0:
            raise ValueError(f"cannot place agent at {pos}")
        agent = AgentState(id=len(self.agents), pos=pos, load=as_fraction(load))
        if agent.load == 1:
            agent.harvest_step = self.clock
        self.agents.append(agent)
        self.occupancy[pos] = agent.id
        return agent

    def place_agent(self, agent_id, pos):
        """Teleport a free agent; scripted setups and tests only."""
        agent = self.agents[agent_id]
        pos = tuple(pos)
        if not self.is_walkable(pos) or self.occupancy[pos] not in (-1, agent_id):
            raise ValueError(f"cannot place agent at {pos}")
        self.occupancy[agent.pos] = -1
        agent.pos = pos
        self.occupancy[pos] = agent_id

    def target_at(self, cell):
        k = self.kind[cell]
        if k == CellKind.RESOURCE_ENTRY:
            return self.resources[int(self.target_id[cell])]
        if k == CellKind.CACHE_ENTRY:
            return self.nest.caches[int(self.target_id[cell])]
        return None

    def join_target(self, agent_id):
        """The queue a JOIN would enter right now, or None."""
        agent = self.agents[agent_id]
        return next((t for t in self.targets_near(agent.pos) if self.compatible(agent, t)), None)

    def targets_near(self, pos):
        """Queue targets whose entry is at ``pos`` or orthogonally adjacent."""
        found = []
        for cell in [tuple(pos), *self.neighbors4(pos)]:
            t = self.target_at(cell)
            if t is not None:
                found.append(t)
        return found

    def compatible(self, agent: AgentState, target) -> bool:
        if target.kind == "resource":
            return not agent.is_full and not target.depleted
        return agent.is_full

    def free_agents(self):
        return [a for a in self.agents if a.is_free]

    def food_in_agents(self) -> Fraction:
        return sum((a.load for a in self.agents), Fraction(0))

    def food_balance(self) -> Fraction:
        """Gathered minus (delivered + carried); zero when food is conserved."""
        return self.total_gathered - self.nest.units_received - self.food_in_agents()

    @property
    def harvest_count(self) -> int:
        return sum(r.harvests for r in self.resources.values()) + self._retired_harvests

    # -- simulation -------------------------------------------------------

    def valid_actions(self, agent_id) -> np.ndarray:
        return valid_actions(self, agent_id)

    def step(self, actions, field=None) -> StepOutcome:
        return step_world(self, actions, field)


def _reserved_box(world: GridWorld) -> np.ndarray:
    r, c = world.nest.origin
    mask = np.zeros_like(world.kind, dtype=bool)
    mask[max(r - RESERVED_RING, 0) : r + 2 + RESERVED_RING, max(c - RESERVED_RING, 0) : c + 2 + RESERVED_RING] = True
    return mask


def _connected(world: GridWorld) -> bool:
    labels, _ = ndimage.label(world.walkable_mask())
    home = labels[world.nest.caches[0].entry_cell]
    if home == 0:
        return False
    cells = [c.entry_cell for c in world.nest.caches] + [r.entry_cell for r in world.resources.values()]
    return all(labels[cell] == home for cell in cells)


def _nest_component(world: GridWorld) -> np.ndarray:
    labels, _ = ndimage.label(world.walkable_mask())
    return labels == labels[world.nest.caches[0].entry_cell]


def _pick_resource_site(world, rng, allowed: np.ndarray):
    """Uniform body cell among ``allowed`` with an allowed empty neighbour for the entry."""
    cand = np.argwhere(allowed)
    for i in rng.permutation(len(cand)):
        r, c = cand[i]
        entries = [nb for nb in world.neighbors4((r, c)) if allowed[nb]]
        if entries:
            return (int(r), int(c)), entries[int(rng.integers(len(entries)))]
    return None


def generate_world(config: WorldConfig, max_attempts: int = 100) -> GridWorld:
    config.validate()
    rng = _stream(config.rng_seed, _PLACEMENT_STREAM)
    for _ in range(max_attempts):
        world = GridWorld(config)
        world._set_nest((config.height // 2 - 1, config.width // 2 - 1))
        reserved = _reserved_box(world)
        region = np.ones_like(reserved)
        if config.resource_radius is not None:
            r, c = world.nest.origin
            k = config.resource_radius
            region = np.zeros_like(reserved)
            region[max(r - k, 0) : r + 2 + k, max(c - k, 0) : c + 2 + k] = True

        ok = True
        for _ in range(config.num_resources):
            allowed = (world.kind == CellKind.EMPTY) & ~reserved & region
            site = _pick_resource_site(world, rng, allowed)
            if site is None:
                ok = False
                break
            world.add_resource(*site)
        if not ok:
            raise PlacementError("no room for the requested resources")

        free = int(np.count_nonzero(world.kind == CellKind.EMPTY))
        n_obstacles = math.floor(config.obstacle_density * free)
        cand = np.argwhere((world.kind == CellKind.EMPTY) & ~reserved)
        if len(cand) < n_obstacles:
            raise PlacementError("no room for the requested obstacles")
        chosen = rng.choice(len(cand), size=n_obstacles, replace=False) if n_obstacles else []
        for i in chosen:
            world.kind[tuple(cand[i])] = CellKind.OBSTACLE

        if not _connected(world):
            continue
        _spawn_agents(world, rng)
        return world
    raise PlacementError("could not connect every entry to the nest")


def _spawn_agents(world: GridWorld, rng):
    n = world.config.num_agents
    if n == 0:
        return
    r0, c0 = world.nest.origin
    reach = _nest_component(world) & (world.kind == CellKind.EMPTY)
    cand = np.argwhere(reach)
    # Chebyshev distance to the 2x2 block.
    dr = np.maximum(np.maximum(r0 - cand[:, 0], cand[:, 0] - (r0 + 1)), 0)
    dc = np.maximum(np.maximum(c0 - cand[:, 1], cand[:, 1] - (c0 + 1)), 0)
    ring = np.maximum(dr, dc)
    order = np.lexsort((rng.random(len(cand)), ring))
    if len(order) < n:
        raise PlacementError("not enough free cells to spawn agents")
    for i in order[:n]:
        world.add_agent((int(cand[i, 0]), int(cand[i, 1])))


def valid_actions(world: GridWorld, agent_id) -> np.ndarray:
    agent = world.agents[agent_id]
    mask = np.zeros(N_ACTIONS, dtype=bool)
    if not agent.is_free:
        return mask
    r, c = agent.pos
    for a in MOVE_ACTIONS:
        dr, dc = DISPLACEMENT[a]
        dest = (r + dr, c + dc)
        mask[a] = world.is_walkable(dest) and world.occupancy[dest] < 0
    mask[Action.JOIN] = any(world.compatible(agent, t) for t in world.targets_near(agent.pos))
    return mask


def _join(world: GridWorld, agent: AgentState) -> Event:
    target = world.join_target(agent.id)
    if target is not None:
        world.occupancy[agent.pos] = -1
        target.queue.append(agent.id)
        agent.status = Status.QUEUED
        agent.target = target
        agent.joined_step = world.clock
        return Event.JOINED
    near = world.targets_near(agent.pos)
    wrong_type = any(
        (t.kind == "resource") == agent.is_full for t in near
    )
    return Event.REJECTED_JOIN if wrong_type else Event.NO_QUEUE


def _move(world: GridWorld, agent: AgentState, action: Action) -> Event:
    dr, dc = DISPLACEMENT[action]
    dest = (agent.pos[0] + dr, agent.pos[1] + dc)
    if not world.is_walkable(dest) or world.occupancy[dest] >= 0:
        return Event.BLOCKED
    world.occupancy[agent.pos] = -1
    world.occupancy[dest] = agent.id
    agent.pos = dest
    return Event.MOVED


def nearest_free_cell(world: GridWorld, origin):
    """Closest walkable unoccupied cell by Manhattan distance, ties row-major."""
    if world.is_walkable(origin) and world.occupancy[origin] < 0:
        return origin
    r0, c0 = origin
    for d in range(1, world.height + world.width):
        for dr in range(-d, d + 1):
            rem = d - abs(dr)
            for dc in sorted({-rem, rem}):
                cell = (r0 + dr, c0 + dc)
                if world.is_walkable(cell) and world.occupancy[cell] < 0:
                    return cell
    raise PlacementError("no free cell to release an agent")


def _release(world: GridWorld, agent: AgentState):
    target = agent.target
    target.queue.remove(agent.id)
    cell = nearest_free_cell(world, target.entry_cell)
    agent.pos = cell
    world.occupancy[cell] = agent.id
    agent.status = Status.FREE
    agent.target = None
    agent.joined_step = None


def advance_queues(world: GridWorld) -> dict:
    """Run one interaction step at every queue head.

    Returns a map agent-id -> completion Event (HARVEST, DEPOSIT, RELEASED).
    A head that joined during the current step starts interacting next step.
    """
    done = {}
    for node in list(world.resources.values()):
        if not node.queue:
            continue
        head = world.agents[node.queue[0]]
        if head.joined_step == world.clock:
            continue
        head.status = Status.INTERACTING
        amount = min(world.gather_rate, 1 - head.load)
        if node.remaining is not None:
            amount = min(amount, node.remaining)
            node.remaining -= amount
        head.load += amount
        world.total_gathered += amount
        if head.load == 1:
            head.harvest_step = world.clock
            node.harvests += 1
            _release(world, head)
            done[head.id] = Event.HARVEST
        elif node.depleted:
            _release(world, head)
            done[head.id] = Event.RELEASED
        if node.depleted:
            for aid in list(node.queue):
                _release(world, world.agents[aid])
                done[aid] = Event.RELEASED

    for cache in world.nest.caches:
        if not cache.queue:
            continue
        head = world.agents[cache.queue[0]]
        if head.joined_step == world.clock:
            continue
        head.status = Status.INTERACTING
        amount = min(world.dropoff_rate, head.load)
        head.load -= amount
        world.nest.units_received += amount
        if head.load == 0:
            world.nest.total_deposited += 1
            head.harvest_step = None
            _release(world, head)
            done[head.id] = Event.DEPOSIT
    return done


def respawn_resource(world: GridWorld, rid) -> ResourceNode:
    node = world.resources[rid]
    if not node.depleted or node.queue:
        raise ValueError("only depleted resources with empty queues respawn")
    world._retired_harvests += node.harvests
    world.remove_resource(rid)
    reach = _nest_component(world)
    allowed = (world.kind == CellKind.EMPTY) & (world.occupancy < 0) & reach & ~_reserved_box(world)
    site = _pick_resource_site(world, world._respawn_rng, allowed)
    if site is None:
        raise PlacementError("world saturated: no free cell for a new resource")
    return world.add_resource(*site)


def step_world(world: GridWorld, actions, field=None) -> StepOutcome:
    """Advance the world one step.

    ``actions`` maps agent-id -> Action (or None to stay). Actions for agents
    that are queued or interacting are ignored. When ``field`` is given the
    pheromone layer is updated: full free agents deposit on their cell, then
    the field decays and the wipeout counter ticks.
    """
    events = {}
    order = [int(i) for i in world._step_rng.permutation(len(world.agents))]
    for aid in order:
        agent = world.agents[aid]
        if not agent.is_free:
            continue
        action = actions.get(aid)
        if action is None:
            events[aid] = Event.STAYED
        elif action == Action.JOIN:
            events[aid] = _join(world, agent)
        else:
            events[aid] = _move(world, agent, Action(action))

    for agent in world.agents:
        if agent.id not in events:
            events[agent.id] = Event.QUEUED
    completions = advance_queues(world)
    events.update(completions)

    if field is not None:
        for agent in world.agents:
            if agent.is_free and agent.load == 1 and agent.harvest_step is not None:
                field.deposit(agent.pos, world.clock, agent.harvest_step)
        field.end_step()

    if world.config.respawn_on_depletion:
        for rid in [r.id for r in world.resources.values() if r.depleted and not r.queue]:
            respawn_resource(world, rid)

    outcome = StepOutcome(step=world.clock, order=order, events=events, completions=sorted(completions))
    world.clock += 1
    return outcome


def make_world(config: WorldConfig, resources=(), agents=(), obstacles=()) -> GridWorld:
    """Hand-built world with the nest at its usual place.

    ``resources`` holds (body, entry) pairs, ``agents`` holds positions or
    (position, load) pairs. Used for scripted scenarios and tests.
    """
    world = GridWorld(config)
    world._set_nest((config.height // 2 - 1, config.width // 2 - 1))
    for body, entry in resources:
        world.add_resource(body, entry)
    for cell in obstacles:
        world.kind[tuple(cell)] = CellKind.OBSTACLE
    for spec in agents:
        if len(spec) == 2 and isinstance(spec[0], (tuple, list)):
            world.add_agent(spec[0], spec[1])
        else:
            world.add_agent(spec)
    return world
