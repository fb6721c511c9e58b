"""Minimal dense-tensor numeric core with reverse-mode differentiation."""

from .tape import Gradients, Tape, Tensor, backward
from .optim import AdamState, adam_step
from . import ops

__all__ = [
    "Gradients",
    "Tape",
    "Tensor",
    "backward",
    "AdamState",
    "adam_step",
    "ops",
]
