"""Episode rollouts and the asynchronous advantage actor-critic loop."""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from ..observation import FovConfig, ObservationBuilder
from ..pheromone import CURRICULUM_END, CURRICULUM_START, PheromoneField, build_highways, curriculum_weights
from ..world import N_ACTIONS, WorldConfig, _spawn_agents, generate_world, make_world, step_world, valid_actions
from .filtering import SampleMode, euclidean_action_filter, sample_action
from .losses import Batch, LossWeights, assign_reward, episode_gradients
from .network import NetworkSpec, forward, init_params, initial_state
from .optimizer import Nadam, ParameterStore

log = logging.getLogger(__name__)

LOG_COLUMNS = ("episode", "mean_reward", "L_V", "L_pi", "L_valid", "valid_rate", "w_h", "w_a")


@dataclass
class TrainConfig:
    gamma: float = 0.95
    learning_rate: float = 5e-6
    entropy_weight: float = 0.01
    policy_weight: float = 1.0
    value_weight: float = 0.5
    valid_weight: float = 0.5
    meta_environments: int = 4
    learning_agents: int = 8
    non_learning: tuple = (8, 16, 24, 40)
    episodes: int = 100
    episode_length: int = 512
    curriculum_start: int = CURRICULUM_START
    curriculum_end: int = CURRICULUM_END
    world_sizes: tuple = (24, 32, 48, 64)
    max_obstacle_density: float = 0.05
    resource_range: tuple = (4, 12)
    layout: str = "random"  # or "adjacent": one resource touching the nest
    network: NetworkSpec = field(default_factory=NetworkSpec)
    n_steps: int | None = None
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must be in (0, 1)")
        if min(self.entropy_weight, self.policy_weight, self.value_weight, self.valid_weight) < 0:
            raise ValueError("loss weights must be non-negative")
        if self.curriculum_start >= self.curriculum_end:
            raise ValueError("curriculum start must precede its end")
        if self.layout not in ("random", "adjacent"):
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.learning_agents < 1 or self.meta_environments < 1 or self.workers < 1:
            raise ValueError("need at least one learning agent, environment and worker")
        self.non_learning = tuple(int(n) for n in np.atleast_1d(self.non_learning))
        self.world_sizes = tuple(int(s) for s in np.atleast_1d(self.world_sizes))

    @property
    def loss_weights(self):
        return LossWeights(self.policy_weight, self.value_weight, self.valid_weight)

    def team_size(self, env: int) -> int:
        return self.learning_agents + self.non_learning[env % len(self.non_learning)]

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def adjacent_resource_world(size: int, team: int, rng) -> "GridWorld":
    """Obstacle-free world whose only resource body touches the nest block."""
    config = WorldConfig(size, size, num_resources=1, num_agents=team, rng_seed=int(rng.integers(2**31)))
    r, c = size // 2 - 1, size // 2 - 1
    world = make_world(config, resources=[((r - 1, c + 1), (r - 2, c + 1))])
    _spawn_agents(world, rng)
    return world


def training_world(config: TrainConfig, env: int, rng):
    team = config.team_size(env)
    size = int(rng.choice(config.world_sizes))
    if config.layout == "adjacent":
        return adjacent_resource_world(size, team, rng)
    lo, hi = config.resource_range
    wc = WorldConfig(
        size,
        size,
        obstacle_density=float(rng.uniform(0, config.max_obstacle_density)),
        num_resources=int(rng.integers(lo, hi + 1)),
        num_agents=team,
        rng_seed=int(rng.integers(2**31)),
    )
    return generate_world(wc)


@dataclass
class Rollout:
    batch: Batch  # learning agents only
    rewards: np.ndarray  # (T, team) for every agent
    sampled_valid: list  # one bool per learning-agent decision
    others: dict  # non-learning observations and actions, never used for gradients

    @property
    def mean_reward(self):
        return float(self.batch.rewards.sum(axis=0).mean())

    @property
    def valid_rate(self):
        return float(np.mean(self.sampled_valid)) if self.sampled_valid else float("nan")


def rollout(params, spec: NetworkSpec, world, field: PheromoneField, n_learning: int, steps: int, rng,
            mode=SampleMode.TRAIN) -> Rollout:
    """Run one episode with every agent acting from ``params``.

    The first ``n_learning`` agents are recorded for learning; the others
    only run the forward pass.
    """
    team = len(world.agents)
    fov = FovConfig(spec.fov)
    h, c = initial_state(spec, team)
    obs_rec = np.zeros((steps, n_learning, spec.channels, spec.fov, spec.fov))
    actions = np.zeros((steps, n_learning), dtype=np.int64)
    decided = np.zeros((steps, n_learning))
    invalid = np.zeros((steps, n_learning, N_ACTIONS), dtype=bool)
    rewards = np.zeros((steps, team))
    sampled_valid = []
    others = {"obs": [], "actions": []}
    for t in range(steps):
        build = ObservationBuilder(world, field, fov)
        obs = np.stack([build(a.id) for a in world.agents])
        probs, _, (h, c) = forward(params, spec, obs, (h, c))
        chosen = {}
        for agent in world.agents:
            if not agent.is_free:
                continue
            mask = euclidean_action_filter(world, agent.id, valid_actions(world, agent.id))
            enacted, sampled = sample_action(probs[agent.id], mask, mode, rng)
            chosen[agent.id] = enacted
            if agent.id < n_learning:
                sampled_valid.append(bool(mask[sampled]))
                if enacted is not None:
                    actions[t, agent.id] = int(enacted)
                    decided[t, agent.id] = 1.0
                    invalid[t, agent.id] = ~mask
        obs_rec[t] = obs[:n_learning]
        others["obs"].append(obs[n_learning:])
        others["actions"].append({k: v for k, v in chosen.items() if k >= n_learning})
        outcome = step_world(world, chosen, field)
        for aid, event in outcome.events.items():
            rewards[t, aid] = assign_reward(event)
    build = ObservationBuilder(world, field, fov)
    final = np.stack([build(aid) for aid in range(n_learning)])
    _, bootstrap, _ = forward(params, spec, final, (h[:n_learning], c[:n_learning]))
    batch = Batch(obs_rec, actions, rewards[:, :n_learning].copy(), decided, invalid, bootstrap)
    return Rollout(batch, rewards, sampled_valid, others)


def _env_rng(seed, env, episode):
    return np.random.default_rng([seed, env, episode])


def prepare_episode(config: TrainConfig, env: int, episode: int):
    rng = _env_rng(config.seed, env, episode)
    world = training_world(config, env, rng)
    field_ = PheromoneField((world.height, world.width), seed=int(rng.integers(2**31)))
    field_.H[:] = build_highways(world, field_.params.alpha)
    w_h, w_a = curriculum_weights(episode, config.curriculum_start, config.curriculum_end)
    field_.set_weights(w_h, w_a)
    return world, field_, rng, (w_h, w_a)


@dataclass
class EpisodeResult:
    episode: int
    env: int
    mean_reward: float
    L_V: float
    L_pi: float
    L_valid: float
    valid_rate: float
    w_h: float
    w_a: float


def run_episode(config: TrainConfig, store: ParameterStore, env: int, episode: int, learn=True) -> EpisodeResult:
    params = store.snapshot()
    world, field_, rng, (w_h, w_a) = prepare_episode(config, env, episode)
    ro = rollout(params, config.network, world, field_, config.learning_agents, config.episode_length, rng)
    report, grads = episode_gradients(
        params, config.network, ro.batch, config.gamma, config.entropy_weight, config.loss_weights, config.n_steps
    )
    if learn:
        store.apply(grads)
    return EpisodeResult(episode, env, ro.mean_reward, report.value, report.policy, report.valid, ro.valid_rate, w_h, w_a)


@dataclass
class TrainingResult:
    params: dict
    log: list  # one dict per episode with LOG_COLUMNS
    config: TrainConfig

    def log_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(LOG_COLUMNS)
        for row in self.log:
            writer.writerow([row["episode"]] + [f"{row[k]:.6f}" for k in LOG_COLUMNS[1:]])
        return buf.getvalue()

    def rewards(self) -> np.ndarray:
        return np.array([row["mean_reward"] for row in self.log])


def _summarize(results):
    by_episode = {}
    for r in results:
        by_episode.setdefault(r.episode, []).append(r)
    rows = []
    for ep in sorted(by_episode):
        group = by_episode[ep]
        row = {"episode": ep}
        for key in LOG_COLUMNS[1:]:
            row[key] = float(np.mean([getattr(r, key) for r in group]))
        rows.append(row)
    return rows


def run_training(config: TrainConfig, params=None, learn=True, callback=None) -> TrainingResult:
    """Train from scratch (or from ``params``).

    With ``workers == 1`` environments take turns in a fixed order, so a
    run is reproducible from ``config.seed``. With more workers each
    environment runs in its own thread and updates interleave freely.
    ``learn=False`` keeps the parameters frozen and only logs.
    """
    if params is None:
        params = init_params(config.network, np.random.default_rng([config.seed, 2**16]))
    store = ParameterStore(params, Nadam(config.learning_rate))
    results = []

    def one(env, ep):
        res = run_episode(config, store, env, ep, learn)
        if callback is not None:
            callback(res)
        return res

    if config.workers == 1:
        for ep in range(config.episodes):
            for env in range(config.meta_environments):
                results.append(one(env, ep))
    else:
        def worker(env):
            return [one(env, ep) for ep in range(config.episodes)]

        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            for chunk in pool.map(worker, range(config.meta_environments)):
                results.extend(chunk)
    rows = _summarize(results)
    if rows:
        log.info("trained %d episodes, final mean reward %.3f", len(rows), rows[-1]["mean_reward"])
    return TrainingResult(store.snapshot(), rows, config)


def smoke_config(seed=0, episodes=200, **overrides) -> TrainConfig:
    """Small setting used for the quick learning check."""
    base = dict(
        learning_rate=3e-3,
        meta_environments=1,
        learning_agents=2,
        non_learning=(0,),
        episodes=episodes,
        episode_length=64,
        world_sizes=(12,),
        layout="adjacent",
        network=NetworkSpec(fov=5, body=(("conv", 8), ("pool",), ("fc", 32), ("lstm", 32))),
        seed=seed,
    )
    base.update(overrides)
    return TrainConfig(**base)


def with_overrides(config: TrainConfig, **kw) -> TrainConfig:
    return replace(config, **kw)
