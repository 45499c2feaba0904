"""Minimal tensor engine: reverse-mode autodiff, the layer set the
classifier needs, Adam, and a plateau learning-rate schedule."""

from . import ops
from .kernels import BACKEND
from .layers import BatchNorm1d, BiLSTM, Conv1d, Dense
from .optim import Adam, PlateauLR, reduce_lr_on_plateau
from .tensor import Tensor, as_tensor

__all__ = [
    "ops",
    "BACKEND",
    "BatchNorm1d",
    "BiLSTM",
    "Conv1d",
    "Dense",
    "Adam",
    "PlateauLR",
    "reduce_lr_on_plateau",
    "Tensor",
    "as_tensor",
]
