from .tensor import (
    Tensor,
    ShapeError,
    ContractError,
    concat,
    layer_norm,
    mse,
    grad_check,
)
from .rng import Rng
from .adam import Adam, TrainingError
from .checkpoint import save_arrays, load_arrays, parse_container, CheckpointError

__all__ = [
    "Tensor", "ShapeError", "ContractError", "concat", "layer_norm", "mse",
    "grad_check", "Rng", "Adam", "TrainingError",
    "save_arrays", "load_arrays", "parse_container", "CheckpointError",
]
