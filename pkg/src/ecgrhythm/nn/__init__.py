"""Minimal numpy DenseNet: layers, model, training and gradient checks."""

from .functional import conv2d, rowwise_batchnorm, softmax, softmax_cross_entropy
from .gradcheck import gradient_check
from .layers import DenseBlock
from .model import (CLASSES, REFERENCE_PARAMETER_COUNTS, Model, build_model, predict)
from .train import TrainConfig, TrainLog, accuracy, train

__all__ = [
    "CLASSES", "REFERENCE_PARAMETER_COUNTS", "DenseBlock", "Model", "TrainConfig",
    "TrainLog", "accuracy", "build_model", "conv2d", "gradient_check", "predict",
    "rowwise_batchnorm", "softmax", "softmax_cross_entropy", "train",
]
