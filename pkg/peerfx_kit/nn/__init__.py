"""Small feed-forward networks with explicit gradients."""

from peerfx_kit.nn.checkpoint import MlpCheckpoint, load_checkpoint, save_checkpoint
from peerfx_kit.nn.errors import ModelError, TrainingDivergedError
from peerfx_kit.nn.mlp import (
    Activation,
    DenseLayer,
    ForwardCache,
    Gradients,
    Mlp,
    Mode,
    backward,
    forward,
    partial_wrt_input,
)
from peerfx_kit.nn.optim import Adam
from peerfx_kit.nn.training import (
    Standardizer,
    Trainer,
    batch_indices,
    mse_loss,
    r_squared,
    train_epoch,
)

__all__ = [
    "Activation",
    "Adam",
    "DenseLayer",
    "ForwardCache",
    "Gradients",
    "Mlp",
    "MlpCheckpoint",
    "Mode",
    "ModelError",
    "Standardizer",
    "Trainer",
    "TrainingDivergedError",
    "backward",
    "batch_indices",
    "forward",
    "load_checkpoint",
    "mse_loss",
    "partial_wrt_input",
    "r_squared",
    "save_checkpoint",
    "train_epoch",
]
