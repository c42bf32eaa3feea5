from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import NonFiniteLossError, gradient_check
from .store import Optimizer, OptimizerConfig, ParameterStore, optimizer_step
from .tensor import (
    DegenerateInputError,
    ShapeMismatchError,
    Tensor,
    affine,
    cross_entropy,
    sigmoid,
    softmax,
)

__all__ = [
    "CheckpointError",
    "DegenerateInputError",
    "NonFiniteLossError",
    "Optimizer",
    "OptimizerConfig",
    "ParameterStore",
    "ShapeMismatchError",
    "Tensor",
    "affine",
    "cross_entropy",
    "gradient_check",
    "load_checkpoint",
    "optimizer_step",
    "save_checkpoint",
    "sigmoid",
    "softmax",
]
