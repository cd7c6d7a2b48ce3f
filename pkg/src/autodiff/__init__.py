"""Reverse-mode automatic differentiation over float64 numpy arrays."""

from src.autodiff.tensor import ComputationTape, Function, Tensor, as_tensor, no_grad, parameter
from src.autodiff.layers import GRUParams, gru_cell, layer_norm
from src.autodiff.optim import Adam, AdamState, adam_step
from src.autodiff.gradcheck import check_parameters, grad_check

__all__ = [
    "Adam",
    "AdamState",
    "ComputationTape",
    "Function",
    "GRUParams",
    "Tensor",
    "adam_step",
    "as_tensor",
    "check_parameters",
    "grad_check",
    "gru_cell",
    "layer_norm",
    "no_grad",
    "parameter",
]
