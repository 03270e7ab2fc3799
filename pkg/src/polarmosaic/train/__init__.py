from .backward import backward, loss_and_grad
from .data import TRANSFORMS, augment, sample_patch, transform_plane
from .losses import LossWeights, loss_no_refine, loss_total, mae, mae_aolp, objective
from .loop import (NumericError, TrainResult, smoothed, train_from_manifest, train_loop,
                   write_checkpoint)
from .optim import TrainConfig, TrainState, adam_step, learning_rate

__all__ = [
    "LossWeights", "NumericError", "TRANSFORMS", "TrainConfig", "TrainResult", "TrainState",
    "adam_step", "augment", "backward", "learning_rate", "loss_and_grad", "loss_no_refine",
    "loss_total", "mae", "mae_aolp", "objective", "sample_patch", "train_from_manifest",
    "smoothed", "train_loop", "transform_plane", "write_checkpoint",
]
