"""Reverse-mode autodiff engine, AdamW and gradient checking."""

from .tensor import Parameter, Tape, TapeOp, Tensor, active_tape, backward, zero_grad
from .optim import AdamW, adamw_step
from .gradcheck import GradCheckReport, grad_check
from . import ops

__all__ = [
    "AdamW",
    "GradCheckReport",
    "Parameter",
    "Tape",
    "TapeOp",
    "Tensor",
    "active_tape",
    "adamw_step",
    "backward",
    "grad_check",
    "ops",
    "zero_grad",
]
