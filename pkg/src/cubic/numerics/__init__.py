"""Minimal dense-tensor and reverse-mode autodiff substrate."""

from .gradcheck import check_gradients, finite_diff_grad, max_relative_error
from .serial import load_archive, save_archive
from .tensor import (
    NonFiniteError,
    ShapeError,
    Tensor,
    add,
    concat,
    conv2d,
    default_dtype,
    embedding,
    gelu,
    grad_enabled,
    layer_norm,
    masked_attention,
    masked_softmax,
    matmul,
    mean,
    mul,
    no_grad,
    reshape,
    scale,
    sinusoidal_embedding,
    softmax,
    split,
    stop_gradient,
    straight_through,
    sub,
    total,
    transpose,
    use_dtype,
)

__all__ = [
    "NonFiniteError",
    "ShapeError",
    "Tensor",
    "add",
    "check_gradients",
    "concat",
    "conv2d",
    "default_dtype",
    "embedding",
    "finite_diff_grad",
    "gelu",
    "grad_enabled",
    "layer_norm",
    "load_archive",
    "masked_attention",
    "masked_softmax",
    "matmul",
    "max_relative_error",
    "mean",
    "mul",
    "no_grad",
    "reshape",
    "save_archive",
    "scale",
    "sinusoidal_embedding",
    "softmax",
    "split",
    "stop_gradient",
    "straight_through",
    "sub",
    "total",
    "transpose",
    "use_dtype",
]
