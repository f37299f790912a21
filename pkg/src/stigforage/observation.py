"""Egocentric channel stacks for agent observations.

Observations are channel-major arrays of shape ``(8, fov, fov)``; the
observing agent sits at the center cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .world import CellKind

CHANNEL_LAYOUT = "obs-v1"
CHANNELS = (
    "obstacles",
    "resources",
    "resource_entries",
    "nest",
    "cache_entries",
    "agents",
    "loads",
    "pheromones",
)
N_CHANNELS = len(CHANNELS)
OBSTACLE, RESOURCE, RESOURCE_ENTRY, NEST, CACHE_ENTRY, AGENTS, LOADS, PHEROMONE = range(N_CHANNELS)


@dataclass(frozen=True)
class FovConfig:
    fov: int = 11
    channels: int = N_CHANNELS

    def __post_init__(self):
        if self.fov < 3 or self.fov % 2 == 0:
            raise ValueError("fov must be odd and at least 3")
        if self.channels != N_CHANNELS:
            raise ValueError(f"layout {CHANNEL_LAYOUT} has {N_CHANNELS} channels")

    @property
    def radius(self) -> int:
        return self.fov // 2


class AblationMode(str, Enum):
    PASSTHROUGH = "passthrough"
    EMPTY_CHANNEL = "empty-channel"


def world_stack(world, field=None) -> np.ndarray:
    """Full-world (8, H, W) stack; channel 5 includes every free agent."""
    kind = world.kind
    stack = np.zeros((N_CHANNELS, world.height, world.width))
    stack[OBSTACLE] = np.isin(kind, (CellKind.OBSTACLE, CellKind.RESOURCE, CellKind.NEST))
    stack[RESOURCE] = kind == CellKind.RESOURCE
    stack[RESOURCE_ENTRY] = kind == CellKind.RESOURCE_ENTRY
    stack[NEST] = kind == CellKind.NEST
    stack[CACHE_ENTRY] = kind == CellKind.CACHE_ENTRY
    for agent in world.agents:
        if agent.is_free:
            stack[AGENTS][agent.pos] = 1.0
            stack[LOADS][agent.pos] = float(agent.load)
    if field is not None:
        stack[PHEROMONE] = field.sense_grid()
    return stack


class ObservationBuilder:
    """Pads the world stack once so per-agent windows are plain slices."""

    def __init__(self, world, field=None, cfg: FovConfig = FovConfig()):
        self.world = world
        self.cfg = cfg
        r = cfg.radius
        stack = world_stack(world, field)
        padded = np.zeros((N_CHANNELS, world.height + 2 * r, world.width + 2 * r))
        padded[OBSTACLE] = 1.0
        padded[:, r : r + world.height, r : r + world.width] = stack
        self.padded = padded

    def __call__(self, agent_id) -> np.ndarray:
        row, col = self.world.agents[agent_id].pos
        f = self.cfg.fov
        obs = self.padded[:, row : row + f, col : col + f].copy()
        c = self.cfg.radius
        obs[AGENTS, c, c] = 0.0
        return obs


def extract_observation(world, field, agent_id, cfg: FovConfig = FovConfig()) -> np.ndarray:
    return ObservationBuilder(world, field, cfg)(agent_id)


def pheromone_ablation_view(obs: np.ndarray, mode=AblationMode.PASSTHROUGH) -> np.ndarray:
    mode = AblationMode(mode)
    if mode is AblationMode.PASSTHROUGH:
        return obs
    out = obs.copy()
    out[PHEROMONE] = 0.0
    return out


def format_tensor(obs: np.ndarray) -> str:
    """Channel-major flat text, one channel per line, 6-decimal fixed point."""
    return "\n".join(" ".join(f"{v:.6f}" for v in ch.ravel()) for ch in obs) + "\n"


def parse_tensor(text: str, fov: int) -> np.ndarray:
    rows = [line.split() for line in text.splitlines() if line.strip()]
    return np.array(rows, dtype=float).reshape(len(rows), fov, fov)
