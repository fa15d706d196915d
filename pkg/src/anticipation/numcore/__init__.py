"""Tensor arithmetic with reverse-mode gradients and verification tools."""

from .gradcheck import GradCheckError, GradCheckReport, grad_check
from .rng import Rng
from .tensor import (
    ShapeError,
    Tensor,
    concat,
    gru_cell,
    layernorm,
    matmul,
    no_grad,
    parameters,
    softmax,
    take_along_last,
    take_rows,
)

__all__ = [
    "GradCheckError",
    "GradCheckReport",
    "Rng",
    "ShapeError",
    "Tensor",
    "concat",
    "grad_check",
    "gru_cell",
    "layernorm",
    "matmul",
    "no_grad",
    "parameters",
    "softmax",
    "take_along_last",
    "take_rows",
]
