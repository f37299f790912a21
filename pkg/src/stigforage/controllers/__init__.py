from .base import Controller, ObservingController
from .baselines import (
    CSAF11,
    CardinalityMR,
    GradientFollower,
    RandomWalk,
    cardinality_mr_step,
    csaf11_step,
    gradient_follower_step,
    random_walk_step,
)
from .planner import Assignment, CentralPlanner, Unreachable, greedy_allocate, planner_step, shortest_path

ALGORITHMS = {
    "csaf11": CSAF11,
    "cardinality-mr": CardinalityMR,
    "gradient": GradientFollower,
    "random": RandomWalk,
    "planner": CentralPlanner,
}


def make_controller(name: str, random_state=None, **kwargs) -> Controller:
    """Instantiate a controller by its CLI name."""
    if name == "checkpoint":
        from ..learner.policy import PolicyController

        return PolicyController(random_state=random_state, **kwargs)
    try:
        cls = ALGORITHMS[name]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; choose from {sorted([*ALGORITHMS, 'checkpoint'])}") from None
    return cls(random_state=random_state, **kwargs)


__all__ = [
    "ALGORITHMS",
    "Assignment",
    "CSAF11",
    "CardinalityMR",
    "CentralPlanner",
    "Controller",
    "GradientFollower",
    "ObservingController",
    "RandomWalk",
    "Unreachable",
    "cardinality_mr_step",
    "csaf11_step",
    "gradient_follower_step",
    "greedy_allocate",
    "make_controller",
    "planner_step",
    "random_walk_step",
    "shortest_path",
]
