from .model import (
    PolicyConfig,
    init_policy,
    policy_loss,
    policy_velocity,
    project_future_latents,
    sample_actions,
)
from .train import (
    METHODS,
    ChunkDataset,
    awr_weights,
    future_latents_from_model,
    future_latents_from_truth,
    recap_train_step,
    train_policy,
    train_step,
)

__all__ = [
    "METHODS",
    "ChunkDataset",
    "PolicyConfig",
    "awr_weights",
    "future_latents_from_model",
    "future_latents_from_truth",
    "init_policy",
    "policy_loss",
    "policy_velocity",
    "project_future_latents",
    "recap_train_step",
    "sample_actions",
    "train_policy",
    "train_step",
]
