from .autodiff import flatten, gradients, hvp, numerical_gradient, unflatten
from .ops import (
    BN_VARIANCE_FLOOR,
    add,
    add_n,
    avgpool2d,
    batchnorm2d,
    conv2d,
    global_avgpool,
    linear,
    mul,
    relu,
    scale,
    softmax_cross_entropy,
    sum_all,
    weighted_sum,
)
from .rng import RngState
from .tensor import GradientError, ShapeError, Tape, Tensor, backward, zero_grad

__all__ = [
    "BN_VARIANCE_FLOOR", "GradientError", "RngState", "ShapeError", "Tape", "Tensor",
    "add", "add_n", "avgpool2d", "backward", "batchnorm2d", "conv2d", "flatten",
    "global_avgpool", "gradients", "hvp", "linear", "mul", "numerical_gradient", "relu",
    "scale", "softmax_cross_entropy", "sum_all", "unflatten", "weighted_sum", "zero_grad",
]
