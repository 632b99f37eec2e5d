from .latent import extract_patches, pack_state, tile_plane, unpack_state
from .model import (
    WorldModelConfig,
    encode,
    encode_array,
    fm_loss,
    init_params,
    make_targets,
    predict,
    value_estimates,
    velocity_field,
)
from .train import (
    EpisodeDataset,
    evaluate_values,
    train_world_model,
    value_standardization,
)

__all__ = [
    "EpisodeDataset",
    "WorldModelConfig",
    "encode",
    "encode_array",
    "evaluate_values",
    "extract_patches",
    "fm_loss",
    "init_params",
    "make_targets",
    "pack_state",
    "predict",
    "tile_plane",
    "train_world_model",
    "unpack_state",
    "value_estimates",
    "value_standardization",
    "velocity_field",
]
