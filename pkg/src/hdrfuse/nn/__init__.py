"""Minimal NCHW tensor engine: layers, Adam, gradient checking, checkpoints."""

from .adam import Adam
from .checkpoint import (BATCHNORM, CONV, MAXPOOL, RELU, SOFTMAX, UPSAMPLE,
                         CheckpointError, load_checkpoint, save_checkpoint)
from .gradcheck import (gradient_check, pool_safe_input, relative_error,
                        relu_safe_input, scalar_gradient_check)
from .layers import (BatchNorm2d, ChannelSoftmax, Conv2d, Layer, MaxPool2d,
                     ReLU, Sequential, Upsample2d)
from .tensor import Tensor

__all__ = [
    "Adam", "BatchNorm2d", "ChannelSoftmax", "CheckpointError", "Conv2d",
    "Layer", "MaxPool2d", "ReLU", "Sequential", "Tensor", "Upsample2d",
    "gradient_check", "scalar_gradient_check", "relative_error",
    "relu_safe_input", "pool_safe_input",
    "load_checkpoint", "save_checkpoint",
    "CONV", "BATCHNORM", "RELU", "MAXPOOL", "UPSAMPLE", "SOFTMAX",
]
