from sepkit.nn.checkpoint import load_checkpoint, save_checkpoint
from sepkit.nn.gradcheck import grad_check
from sepkit.nn.layers import (
    BatchNormLayer,
    Conv2dLayer,
    LinearLayer,
    batch_norm,
    conv2d,
    global_avg_pool,
    linear,
    same_pad,
    sgd_step,
)
from sepkit.nn.tensor import Tensor, mse_loss, no_grad, relu

__all__ = [
    "BatchNormLayer",
    "Conv2dLayer",
    "LinearLayer",
    "Tensor",
    "batch_norm",
    "conv2d",
    "global_avg_pool",
    "grad_check",
    "linear",
    "load_checkpoint",
    "mse_loss",
    "no_grad",
    "relu",
    "same_pad",
    "save_checkpoint",
    "sgd_step",
]
