from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import max_gradcheck_error, numeric_gradient, relative_error
from .layers import Conv2d, Parameter, ReLU, concat_channels, softmax, softmax_cross_entropy, split_channels
from .network import FULL_WIDTHS, IN_CHANNELS, NUM_CLASSES, REDUCED_WIDTHS, LiLaBlock, LiLaNet, msra_kernel
from .optim import Adam, AdamConfig
from .training import (
    DEFAULT_DEPTH_SCALE,
    FINETUNE_LR,
    TrainConfig,
    infer_image,
    network_input,
    pixel_accuracy,
    predict,
    train,
)

__all__ = [
    "Adam",
    "AdamConfig",
    "Conv2d",
    "DEFAULT_DEPTH_SCALE",
    "FINETUNE_LR",
    "FULL_WIDTHS",
    "IN_CHANNELS",
    "LiLaBlock",
    "LiLaNet",
    "NUM_CLASSES",
    "Parameter",
    "REDUCED_WIDTHS",
    "ReLU",
    "TrainConfig",
    "concat_channels",
    "infer_image",
    "load_checkpoint",
    "max_gradcheck_error",
    "msra_kernel",
    "network_input",
    "numeric_gradient",
    "pixel_accuracy",
    "predict",
    "relative_error",
    "save_checkpoint",
    "softmax",
    "softmax_cross_entropy",
    "split_channels",
    "train",
]
