"""Scenario files: a world plus its episode schedule."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ..serialization import emit_world, parse_world
from ..world import GridWorld, WorldConfig, generate_world
from .config import MatrixConfig

SUFFIX = ".scn"
NAME_PATTERN = re.compile(r"(?P<type>[a-z]+)_w(?P<size>\d+)_n(?P<team>\d+)_d(?P<density>[\d.]+)_r(?P<rep>\d+)")


class ScenarioType(str, Enum):
    INFINITE = "infinite"
    DEPLETING = "depleting"
    WIPEOUT = "wipeout"


@dataclass
class ScenarioSpec:
    name: str
    text: str  # serialized world, re-parsed for every run
    episode_length: int
    scenario_type: ScenarioType
    wipeouts: list = field(default_factory=list)

    def fresh_world(self) -> GridWorld:
        return parse_world(self.text)[0]

    @property
    def cell(self) -> dict:
        """Matrix coordinates, read from the world itself."""
        world = self.fresh_world()
        return {
            "type": self.scenario_type.value,
            "size": world.width,
            "team": len(world.agents),
            "density": world.config.obstacle_density,
        }


def draw_wipeouts(rng, episode_length: int, count: int = 3, duration: int = 100, max_tries: int = 10_000):
    """Non-overlapping windows with starts in [0, episode_length - duration].

    Rejection sampling: redraw the whole set until no two windows overlap.
    """
    hi = episode_length - duration
    if count * duration > episode_length:
        raise ValueError("windows cannot fit in the episode without overlap")
    for _ in range(max_tries):
        starts = sorted(int(s) for s in rng.integers(0, hi + 1, size=count))
        if all(b - a >= duration for a, b in zip(starts, starts[1:])):
            return [(s, duration) for s in starts]
    raise RuntimeError("could not place non-overlapping wipeout windows")


def scenario_name(kind, size, team, density, rep) -> str:
    return f"{kind}_w{size}_n{team}_d{density:.2f}_r{rep:03d}"


def build_scenario(matrix: MatrixConfig, kind: str, team: int, density: float, rep: int) -> ScenarioSpec:
    kind = ScenarioType(kind)
    type_idx = [t.value for t in ScenarioType].index(kind.value)
    ss = np.random.SeedSequence(matrix.seed, spawn_key=(type_idx, team, int(round(density * 10_000)), rep))
    rng = np.random.default_rng(ss)
    lo, hi = matrix.resources
    depleting = kind is ScenarioType.DEPLETING
    config = WorldConfig(
        matrix.world_size,
        matrix.world_size,
        obstacle_density=float(density),
        num_resources=int(rng.integers(lo, hi + 1)),
        resource_capacity=matrix.resource_capacity if depleting else None,
        gather_rate=matrix.gather_rate,
        dropoff_rate=matrix.dropoff_rate,
        respawn_on_depletion=depleting,
        rng_seed=int(rng.integers(2**31)),
        num_agents=team,
    )
    world = generate_world(config)
    wipeouts = []
    if kind is ScenarioType.WIPEOUT:
        wipeouts = draw_wipeouts(rng, matrix.episode_length, matrix.wipeout_count, matrix.wipeout_duration)
    schedule = {"episode_length": matrix.episode_length, "scenario_type": kind.value, "wipeouts": wipeouts}
    name = scenario_name(kind.value, matrix.world_size, team, density, rep)
    return ScenarioSpec(name, emit_world(world, schedule), matrix.episode_length, kind, wipeouts)


def gen_scenarios(matrix: MatrixConfig, out_dir) -> list:
    """Write one file per (type, team, density, replicate); returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for kind in matrix.types:
        for team, density in matrix.cells:
            for rep in range(matrix.replicates):
                spec = build_scenario(matrix, kind, team, density, rep)
                path = out / f"{spec.name}{SUFFIX}"
                path.write_text(spec.text)
                paths.append(path)
    return paths


def load_scenario(path) -> ScenarioSpec:
    path = Path(path)
    text = path.read_text()
    _, schedule = parse_world(text)
    if schedule is None:
        schedule = {"episode_length": 1024, "scenario_type": "infinite", "wipeouts": []}
    return ScenarioSpec(
        path.stem, text, schedule["episode_length"], ScenarioType(schedule["scenario_type"]), list(schedule["wipeouts"])
    )


def list_scenarios(directory) -> list:
    return sorted(Path(directory).glob(f"*{SUFFIX}"))
