from .filtering import SampleMode, euclidean_action_filter, filter_toward, sample_action
from .losses import (
    Batch,
    LossWeights,
    advantages,
    assign_reward,
    discounted_returns,
    entropy,
    episode_gradients,
    policy_loss,
    validity_loss,
    value_loss,
)
from .network import NetworkSpec, ShapeError, forward, init_params, sequence_backward, sequence_forward
from .optimizer import Nadam, ParameterStore
from .trainer import TrainConfig, TrainingResult, rollout, run_training, smoke_config
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .policy import ActorCriticForager, PolicyController
