import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stigforage.serialization import emit_world
from stigforage.world import (
    Action,
    CellKind,
    Event,
    PlacementError,
    Status,
    WorldConfig,
    generate_world,
    interaction_steps,
    make_world,
    respawn_resource,
    step_world,
    valid_actions,
)


def cfg(**kw):
    base = dict(width=16, height=16, num_resources=1, num_agents=0, rng_seed=0)
    base.update(kw)
    return WorldConfig(**base)


# 16x16 nest block is rows 7-8, cols 7-8; cache entries:
N_CACHE, E_CACHE, S_CACHE, W_CACHE = (6, 7), (7, 9), (9, 8), (8, 6)


def test_generate_small_world():
    world = generate_world(WorldConfig(16, 16, num_resources=3, num_agents=4, rng_seed=7))
    assert world.nest.origin == (7, 7)
    assert np.count_nonzero(world.kind == CellKind.NEST) == 4
    assert np.count_nonzero(world.kind == CellKind.CACHE_ENTRY) == 4
    assert np.count_nonzero(world.kind == CellKind.RESOURCE) == 3
    assert np.count_nonzero(world.kind == CellKind.RESOURCE_ENTRY) == 3
    assert np.count_nonzero(world.kind == CellKind.OBSTACLE) == 0
    assert [c.entry_cell for c in world.nest.caches] == [N_CACHE, E_CACHE, S_CACHE, W_CACHE]
    for node in world.resources.values():
        dr = abs(node.body_cell[0] - node.entry_cell[0])
        dc = abs(node.body_cell[1] - node.entry_cell[1])
        assert dr + dc == 1


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_obstacle_count_matches_density(seed):
    world = generate_world(WorldConfig(128, 128, obstacle_density=0.05, num_resources=12, num_agents=16, rng_seed=seed))
    # free cells: everything not nest, cache entry, resource body or resource entry
    free = 128 * 128 - 4 - 4 - 2 * 12
    assert np.count_nonzero(world.kind == CellKind.OBSTACLE) == math.floor(0.05 * free)


def test_generation_is_deterministic():
    c = WorldConfig(40, 40, obstacle_density=0.1, num_resources=6, num_agents=20, rng_seed=11)
    assert emit_world(generate_world(c)) == emit_world(generate_world(c))
    other = WorldConfig(40, 40, obstacle_density=0.1, num_resources=6, num_agents=20, rng_seed=12)
    assert emit_world(generate_world(c)) != emit_world(generate_world(other))


def test_placement_infeasible():
    with pytest.raises(PlacementError):
        generate_world(WorldConfig(12, 12, num_resources=200, num_agents=0))


@pytest.mark.parametrize(
    "kw", [dict(width=11), dict(obstacle_density=0.6), dict(gather_rate=0.0), dict(num_resources=0)]
)
def test_config_invariants(kw):
    with pytest.raises(ValueError):
        generate_world(cfg(**kw))


def test_entries_reachable_from_nest():
    from scipy import ndimage

    for seed in range(10):
        world = generate_world(WorldConfig(32, 32, obstacle_density=0.3, num_resources=5, num_agents=8, rng_seed=seed))
        labels, _ = ndimage.label(world.walkable_mask())
        home = labels[world.nest.caches[0].entry_cell]
        assert home > 0
        assert all(labels[c.entry_cell] == home for c in world.nest.caches)
        for node in world.resources.values():
            assert labels[node.entry_cell] == home


def test_collision_exactly_one_mover_succeeds():
    world = make_world(cfg(), resources=[((2, 2), (2, 3))], agents=[(4, 3), (4, 5)])
    out = step_world(world, {0: Action.EAST, 1: Action.WEST})
    first = next(a for a in out.order if a in (0, 1))
    assert out.events[first] is Event.MOVED
    assert out.events[1 - first] is Event.BLOCKED
    assert world.occupancy[4, 4] == first


def test_full_agent_rejected_at_resource_queue():
    world = make_world(cfg(), resources=[((2, 2), (2, 3))], agents=[((3, 3), 1)])
    out = step_world(world, {0: Action.JOIN})
    assert out.events[0] is Event.REJECTED_JOIN
    assert world.agents[0].is_free


def test_join_with_no_queue_nearby_is_absorbed():
    world = make_world(cfg(), resources=[((2, 2), (2, 3))], agents=[(12, 12)])
    out = step_world(world, {0: Action.JOIN})
    assert out.events[0] is Event.NO_QUEUE
    assert world.agents[0].pos == (12, 12)


def test_empty_agent_joins_on_entry_cell():
    world = make_world(cfg(), resources=[((2, 2), (2, 3))], agents=[(2, 3)])
    out = step_world(world, {0: Action.JOIN})
    agent = world.agents[0]
    assert out.events[0] is Event.JOINED
    assert agent.status is Status.QUEUED and agent.target is world.resources[0]
    assert world.occupancy[2, 3] == -1


@pytest.mark.parametrize("rate,steps", [(1.0, 1), (0.5, 2), (0.25, 4), (0.1, 10), (0.3, 4)])
def test_interaction_duration(rate, steps):
    assert interaction_steps(rate) == steps
    world = make_world(cfg(gather_rate=rate), resources=[((2, 2), (2, 3))], agents=[(2, 3)])
    step_world(world, {0: Action.JOIN})
    n = 0
    while world.agents[0].load < 1:
        out = step_world(world, {})
        n += 1
    assert n == steps
    assert out.events[0] is Event.HARVEST
    assert world.agents[0].harvest_step == out.step


def test_deposit_in_one_step_at_rate_one():
    world = make_world(cfg(dropoff_rate=1.0), resources=[((2, 2), (2, 3))], agents=[(N_CACHE, 1)])
    step_world(world, {0: Action.JOIN})
    out = step_world(world, {})
    assert out.events[0] is Event.DEPOSIT
    assert world.nest.total_deposited == 1
    assert world.agents[0].harvest_step is None


def test_fifo_three_agents():
    world = make_world(cfg(gather_rate=0.5), resources=[((2, 2), (2, 3))], agents=[(2, 3), (1, 3), (3, 3)])
    completions = []
    script = [{0: Action.JOIN}, {1: Action.JOIN}, {2: Action.JOIN}] + [{}] * 10
    for actions in script:  # one join per step so join order is A, B, C
        out = step_world(world, actions)
        completions += [a for a in out.completions if out.events[a] is Event.HARVEST]
    assert completions[:3] == [0, 1, 2]


def test_queue_commitment_ignores_actions():
    world = make_world(cfg(gather_rate=0.25), resources=[((2, 2), (2, 3))], agents=[(2, 3)])
    step_world(world, {0: Action.JOIN})
    for _ in range(2):
        out = step_world(world, {0: Action.SOUTH})
        assert out.events[0] is Event.QUEUED
        assert world.agents[0].status is Status.INTERACTING


def test_released_at_nearest_free_cell_when_entry_occupied():
    world = make_world(cfg(), resources=[((2, 2), (2, 3))], agents=[(2, 3), (5, 5)])
    step_world(world, {0: Action.JOIN, 1: None})
    world.place_agent(1, (2, 3))
    out = step_world(world, {1: None})
    assert out.events[0] is Event.HARVEST
    # distance-1 cells in row-major order: (1,3) first
    assert world.agents[0].pos == (1, 3)


def test_finite_resource_respawn_keeps_count():
    world = generate_world(
        WorldConfig(24, 24, num_resources=10, resource_capacity=1, respawn_on_depletion=True, num_agents=0, rng_seed=3)
    )
    node = next(iter(world.resources.values()))
    before = {r.id: r.body_cell for r in world.resources.values()}
    world.add_agent(node.entry_cell)
    step_world(world, {0: Action.JOIN})
    step_world(world, {})
    assert len(world.resources) == 10
    after = {r.id: r.body_cell for r in world.resources.values()}
    kept = set(before) & set(after)
    assert len(kept) == 9 and all(before[k] == after[k] for k in kept)
    assert node.id not in after


def test_respawn_disabled_leaves_depleted_body():
    world = make_world(cfg(resource_capacity=1), resources=[((2, 2), (2, 3))], agents=[(2, 3)])
    step_world(world, {0: Action.JOIN})
    step_world(world, {})
    assert world.resources[0].remaining == 0
    assert world.kind[2, 2] == CellKind.RESOURCE
    # depleted resources do not accept queues
    world.place_agent(0, (2, 3))
    world.agents[0].load = Fraction(0)
    assert not valid_actions(world, 0)[Action.JOIN]


def test_respawn_is_deterministic():
    def run():
        c = WorldConfig(24, 24, num_resources=3, resource_capacity=1, respawn_on_depletion=True, num_agents=0, rng_seed=5)
        world = generate_world(c)
        node = world.resources[0]
        world.add_agent(node.entry_cell)
        step_world(world, {0: Action.JOIN})
        step_world(world, {})
        return sorted((r.id, r.body_cell, r.entry_cell) for r in world.resources.values())

    assert run() == run()


def test_respawn_precondition():
    world = make_world(cfg(), resources=[((2, 2), (2, 3))])
    with pytest.raises(ValueError):
        respawn_resource(world, 0)


def test_mid_harvest_depletion_leaves_partial_load():
    world = make_world(cfg(gather_rate=0.5), resources=[((2, 2), (2, 3))], agents=[(2, 3), (1, 3)])
    world.resources[0].remaining = Fraction(3, 4)
    step_world(world, {0: Action.JOIN, 1: None})
    step_world(world, {1: Action.JOIN})
    out = step_world(world, {})
    assert out.events[0] is Event.RELEASED and out.events[1] is Event.RELEASED
    assert world.agents[0].load == Fraction(3, 4)
    assert world.agents[0].is_full and world.agents[0].harvest_step is None
    assert world.food_balance() == 0


def test_valid_actions_fully_blocked():
    obstacles = [(3, 4), (5, 4), (4, 3), (4, 5)]
    world = make_world(cfg(), resources=[((12, 12), (12, 13))], agents=[(4, 4)], obstacles=obstacles)
    assert not valid_actions(world, 0).any()


def test_valid_actions_open_plain():
    world = make_world(cfg(), resources=[((12, 12), (12, 13))], agents=[(3, 3)])
    assert valid_actions(world, 0).tolist() == [True, True, True, True, False]


def test_valid_actions_full_agent_next_to_cache():
    world = make_world(cfg(), resources=[((12, 12), (12, 13))], agents=[((5, 7), 1)])
    assert valid_actions(world, 0)[Action.JOIN]


def test_partial_load_treated_as_full():
    world = make_world(cfg(), resources=[((2, 2), (2, 3))], agents=[((2, 4), Fraction(1, 2)), ((5, 7), Fraction(1, 2))])
    assert not valid_actions(world, 0)[Action.JOIN]
    assert valid_actions(world, 1)[Action.JOIN]


def random_episode(seed, steps=150, rate=0.5):
    rng = np.random.default_rng(seed)
    world = generate_world(
        WorldConfig(16, 16, num_resources=2, num_agents=8, gather_rate=rate, dropoff_rate=rate, rng_seed=seed)
    )
    log = []
    for _ in range(steps):
        actions = {}
        for a in world.free_agents():
            mask = valid_actions(world, a.id)
            if mask[Action.JOIN]:
                actions[a.id] = Action.JOIN
            else:
                actions[a.id] = Action(int(rng.integers(5)))
        out = step_world(world, actions)
        log.append(out)
        yield world, out


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_invariants_over_random_episodes(seed):
    joins = {}
    completions = {}
    queued_pos = {}
    last_total = 0
    for world, out in random_episode(seed):
        # occupancy exclusivity
        free = [a for a in world.agents if a.is_free]
        cells = [a.pos for a in free]
        assert len(cells) == len(set(cells))
        for a in free:
            assert world.kind[a.pos] in (CellKind.EMPTY, CellKind.RESOURCE_ENTRY, CellKind.CACHE_ENTRY)
            assert world.occupancy[a.pos] == a.id
        assert np.count_nonzero(world.occupancy >= 0) == len(free)
        # food conservation and monotone nest counter
        assert world.food_balance() == 0
        assert world.nest.total_deposited - last_total == out.count(Event.DEPOSIT)
        last_total = world.nest.total_deposited
        # FIFO logs
        for aid, ev in out.events.items():
            agent = world.agents[aid]
            if ev is Event.JOINED:
                joins.setdefault(agent.target.kind + str(agent.target.id), []).append(aid)
                queued_pos[aid] = agent.pos
            if ev in (Event.HARVEST, Event.DEPOSIT):
                kind = "resource" if ev is Event.HARVEST else "cache"
                key = next(k for k, v in joins.items() if k.startswith(kind) and aid in v)
                completions.setdefault(key, []).append(aid)
                joins[key].remove(aid)
                # remember order relative to remaining queue
                assert all(
                    world.agents[o].status is not Status.FREE for o in joins[key]
                ), "queue order violated"
        for a in world.agents:
            assert 0 <= a.load <= 1
            if not a.is_free:
                assert world.occupancy[a.pos] != a.id or world.occupancy[a.pos] == -1


def test_fifo_brute_force_log_comparison():
    for seed in range(20):
        order_in, order_out = {}, {}
        for world, out in random_episode(seed, steps=120, rate=0.25):
            for aid in out.order:
                if out.events[aid] is Event.JOINED:
                    t = world.agents[aid].target
                    order_in.setdefault((t.kind, t.id), []).append(aid)
            for aid in out.completions:
                if out.events[aid] in (Event.HARVEST, Event.DEPOSIT):
                    kind = "resource" if out.events[aid] is Event.HARVEST else "cache"
                    key = next(k for k, v in order_in.items() if k[0] == kind and aid in v[len(order_out.get(k, [])):])
                    order_out.setdefault(key, []).append(aid)
        for key, done in order_out.items():
            assert done == order_in[key][: len(done)]


def test_determinism_of_event_logs():
    def log(seed):
        return [(o.order, sorted((k, v.value) for k, v in o.events.items())) for _, o in random_episode(seed, 80)]

    assert log(4) == log(4)
