"""Image, point and joint encoders plus the two-phase training procedure."""

from .checkpoint import load_checkpoint, save_checkpoint
from .layers import (
    Conv2d,
    Dense,
    DepthwiseConv2d,
    GlobalAvgPool,
    InstanceNorm,
    MaxPoints,
    ReLU,
    ReLU6,
    Residual,
    Sequential,
    FeatureNorm,
    cross_entropy,
    softmax,
)
from .network import ArchConfig, FeatureVector, JointModel, classify_views
from .train import TrainConfig, TrainExample, train

__all__ = [
    "ArchConfig",
    "Conv2d",
    "Dense",
    "DepthwiseConv2d",
    "FeatureVector",
    "GlobalAvgPool",
    "InstanceNorm",
    "JointModel",
    "MaxPoints",
    "ReLU",
    "ReLU6",
    "Residual",
    "Sequential",
    "TrainConfig",
    "TrainExample",
    "FeatureNorm",
    "classify_views",
    "cross_entropy",
    "load_checkpoint",
    "save_checkpoint",
    "softmax",
    "train",
]
