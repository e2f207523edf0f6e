"""Small float64 reverse-mode autodiff with the layers and optimizer the models need."""

from rulfp.diffcore.checkpoint import load_params, save_params
from rulfp.diffcore.gradcheck import grad_check, numeric_grad, relative_errors
from rulfp.diffcore.layers import (LayerSpec, dropout, fc_forward, init_dense, init_lstm,
                                   lstm_sequence, lstm_step)
from rulfp.diffcore.optim import OptimizerState, adam_update
from rulfp.diffcore.params import ModelParams, l2_penalty
from rulfp.diffcore.tensor import Tensor, as_tensor, backward, concat, elementwise, grad

__all__ = [
    "LayerSpec", "ModelParams", "OptimizerState", "Tensor", "adam_update", "as_tensor",
    "backward", "concat", "dropout", "elementwise", "fc_forward", "grad", "grad_check",
    "init_dense", "init_lstm", "l2_penalty", "load_params", "lstm_sequence", "lstm_step",
    "numeric_grad", "relative_errors", "save_params",
]
