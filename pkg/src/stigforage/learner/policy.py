"""Inference-time control from trained parameters, and an estimator wrapper."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..controllers.base import Controller
from ..observation import AblationMode, FovConfig, ObservationBuilder, pheromone_ablation_view
from ..world import valid_actions
from .checkpoint import load_checkpoint
from .filtering import SampleMode, euclidean_action_filter, sample_action
from .network import forward, init_params, initial_state
from .trainer import TrainConfig, run_training


class PolicyController(Controller):
    """Decentralized control where every agent runs the shared network.

    Give either a ``checkpoint`` path or a ``params``/``spec`` pair. In test
    mode agents act freely and the world absorbs invalid moves.
    """

    uses_pheromones = True

    def __init__(self, checkpoint=None, params=None, spec=None, mode="test", ablate_pheromones=False,
                 random_state=None):
        self.checkpoint = checkpoint
        self.params = params
        self.spec = spec
        self.mode = mode
        self.ablate_pheromones = ablate_pheromones
        self.random_state = random_state

    def _reset(self, world):
        if self.checkpoint is not None:
            self.params_, self.spec_, _ = load_checkpoint(self.checkpoint)
        elif self.params is not None and self.spec is not None:
            self.params_, self.spec_ = self.params, self.spec
        else:
            raise ValueError("PolicyController needs a checkpoint or params and spec")
        self.fov_ = FovConfig(self.spec_.fov, self.spec_.channels)
        self.state_ = initial_state(self.spec_, len(world.agents))

    def _decide(self, world, field):
        build = ObservationBuilder(world, field, self.fov_)
        obs = np.stack([build(a.id) for a in world.agents])
        if self.ablate_pheromones:
            obs = np.stack([pheromone_ablation_view(o, AblationMode.EMPTY_CHANNEL) for o in obs])
        probs, _, self.state_ = forward(self.params_, self.spec_, obs, self.state_)
        actions = {}
        for agent in world.agents:
            if agent.is_free:
                mask = valid_actions(world, agent.id)
                if SampleMode(self.mode) is SampleMode.TRAIN:
                    mask = euclidean_action_filter(world, agent.id, mask)
                actions[agent.id], _ = sample_action(probs[agent.id], mask, self.mode, self.rng_)
        return actions


class ActorCriticForager(BaseEstimator):
    """Estimator front end for training.

    ``fit()`` runs the actor-critic loop from a ``TrainConfig`` built from
    the constructor arguments; ``predict_proba`` maps observations to action
    probabilities using a fresh recurrent state.
    """

    def __init__(self, config: TrainConfig | None = None, learn=True):
        self.config = config
        self.learn = learn

    def fit(self, X=None, y=None):
        config = self.config or TrainConfig()
        result = run_training(config, learn=self.learn)
        self.params_ = result.params
        self.spec_ = config.network
        self.log_ = result.log
        return self

    def predict_proba(self, observations):
        check_is_fitted(self, "params_")
        obs = np.asarray(observations, dtype=np.float64)
        probs, _, _ = forward(self.params_, self.spec_, obs)
        return probs

    def predict(self, observations):
        return self.predict_proba(observations).argmax(axis=-1)

    def as_controller(self, **kw) -> PolicyController:
        check_is_fitted(self, "params_")
        return PolicyController(params=self.params_, spec=self.spec_, **kw)


def untrained_params(spec, seed=0):
    return init_params(spec, np.random.default_rng(seed))
