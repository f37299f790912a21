"""Deterministic multi-agent foraging with pheromone trails."""

from .observation import FovConfig, extract_observation, pheromone_ablation_view
from .pheromone import NoiseMode, PheromoneField, PheromoneParams, build_highways, curriculum_weights
from .world import (
    Action,
    Event,
    GridWorld,
    PlacementError,
    WorldConfig,
    advance_queues,
    generate_world,
    respawn_resource,
    step_world,
    valid_actions,
)

__version__ = "0.1.0"
