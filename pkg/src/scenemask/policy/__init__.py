"""Behavior-cloning policy: model, training loop, and simulator rollouts."""

from .model import (
    DOWNSAMPLE,
    Params,
    PolicyConfig,
    downsample,
    finite_difference_check,
    forward,
    init_params,
    load_checkpoint,
    loss_and_grad,
    observation_vector,
    predict,
    save_checkpoint,
)
from .rollout import RolloutResult, rollout
from .train import TrainConfig, build_training_set, history_csv, train

__all__ = [
    "DOWNSAMPLE",
    "Params",
    "PolicyConfig",
    "RolloutResult",
    "TrainConfig",
    "build_training_set",
    "downsample",
    "finite_difference_check",
    "forward",
    "history_csv",
    "init_params",
    "load_checkpoint",
    "loss_and_grad",
    "observation_vector",
    "predict",
    "rollout",
    "save_checkpoint",
    "train",
]
