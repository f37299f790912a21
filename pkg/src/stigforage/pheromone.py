"""Pheromone concentration field.

A single scalar grid holds the strongest trail at every cell. Taking the
maximum when writing is equivalent to keeping one layer per agent and taking
the maximum when reading, because multiplying by the decay factor preserves
order.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

CURRICULUM_START = 5000
CURRICULUM_END = 10000


class NoiseMode(str, Enum):
    NORMAL = "normal"
    NO_GRADIENT = "no-gradient"
    LOCAL_NOISE = "local-noise"
    GRADIENT_DESTROYING = "gradient-destroying"


@dataclass
class PheromoneParams:
    alpha: float = 0.97  # per-step decay of a carrier's trail since harvest
    beta: float = 0.99  # per-step decay of everything already on the ground
    noise_mode: NoiseMode = NoiseMode.NORMAL
    local_noise: float = 0.1
    # lower bound of the uniform draw in gradient-destroying mode
    destroy_low: float = 0.2

    def __post_init__(self):
        self.noise_mode = NoiseMode(self.noise_mode)
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


class PheromoneField:
    def __init__(self, shape, params: PheromoneParams | None = None, seed: int = 0):
        self.params = params or PheromoneParams()
        self.P = np.zeros(shape, dtype=np.float64)
        self.H = np.zeros(shape, dtype=np.float64)
        self.highway_weight = 0.0
        self.agent_weight = 1.0
        self.wipeout_remaining = 0
        self.rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))

    @property
    def shape(self):
        return self.P.shape

    def deposit_value(self, t: int, h: int) -> float:
        p = self.params
        mode = p.noise_mode
        if mode is NoiseMode.NORMAL:
            return p.alpha ** (t - h)
        if mode is NoiseMode.NO_GRADIENT:
            return 1.0
        if mode is NoiseMode.LOCAL_NOISE:
            u = self.rng.uniform(-p.local_noise, p.local_noise)
            return float(np.clip(p.alpha ** (t - h) + u, 0.0, 1.0))
        return float(self.rng.uniform(p.destroy_low, 1.0))

    def deposit(self, cell, t: int, h: int):
        """Write a carrier's trail at ``cell``; strongest value wins."""
        if self.wipeout_remaining > 0:
            return
        d = self.deposit_value(t, h)
        if d > self.P[cell]:
            self.P[cell] = d

    def decay_step(self):
        self.P *= self.params.beta

    def end_step(self):
        """Per-step bookkeeping after all deposits: decay, then wipeout tick."""
        self.decay_step()
        if self.wipeout_remaining > 0:
            self.wipeout_remaining -= 1

    def trigger_wipeout(self, duration: int):
        if duration <= 0:
            raise ValueError("wipeout duration must be positive")
        self.P[:] = 0.0
        self.wipeout_remaining = int(duration)

    def set_weights(self, highway_weight: float, agent_weight: float):
        if not (0.0 <= highway_weight <= 1.0 and 0.0 <= agent_weight <= 1.0):
            raise ValueError("weights must lie in [0, 1]")
        self.highway_weight = float(highway_weight)
        self.agent_weight = float(agent_weight)

    def sense(self, cell) -> float:
        if self.wipeout_remaining > 0:
            return 0.0
        return max(self.agent_weight * self.P[cell], self.highway_weight * self.H[cell])

    def sense_grid(self) -> np.ndarray:
        if self.wipeout_remaining > 0:
            return np.zeros_like(self.P)
        return np.maximum(self.agent_weight * self.P, self.highway_weight * self.H)

    def dump(self, which: str = "P") -> str:
        grid = {"P": self.P, "H": self.H, "sensed": self.sense_grid()}[which]
        return "\n".join(" ".join(f"{v:.6f}" for v in row) for row in grid) + "\n"


def parse_dump(text: str) -> np.ndarray:
    return np.array([[float(v) for v in line.split()] for line in text.splitlines() if line.strip()])


def bresenham(start, end):
    """Cells on the rasterized segment from ``start`` to ``end`` inclusive."""
    (r0, c0), (r1, c1) = start, end
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    err = dc - dr
    cells = []
    r, c = r0, c0
    while True:
        cells.append((r, c))
        if (r, c) == (r1, c1):
            return cells
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr


def build_highways(world, alpha: float = 0.97) -> np.ndarray:
    """Static trails from every resource entry to its nearest cache entry.

    The value at path index k (0 at the resource) is alpha**k, the profile a
    carrier would leave walking home straight after harvesting.
    """
    H = np.zeros((world.height, world.width))
    caches = [c.entry_cell for c in world.nest.caches]
    for node in world.resources.values():
        er, ec = node.entry_cell
        goal = min(caches, key=lambda e: ((e[0] - er) ** 2 + (e[1] - ec) ** 2, e))
        for k, cell in enumerate(bresenham(node.entry_cell, goal)):
            H[cell] = max(H[cell], alpha**k)
    return H


def curriculum_weights(episode: int, start: int = CURRICULUM_START, end: int = CURRICULUM_END):
    """(highway weight, agent weight) for a training episode."""
    if episode < 0:
        raise ValueError("episode must be non-negative")
    if episode <= start:
        return 1.0, 0.0
    if episode >= end:
        return 0.0, 1.0
    w_h = (end - episode) / (end - start)
    return w_h, 1.0 - w_h
