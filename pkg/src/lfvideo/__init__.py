"""Hybrid light-field video synthesis.

Sparse light-field keyframes plus a dense 2D video go in; a full light-field
video comes out, synthesized by trainable disparity, temporal-flow, warp-flow,
and appearance networks with rendering applications on top.
"""

from .tensor import Tensor, finite_checks, set_finite_checks
from .nn import AdamState, ConvLayer, ConvNet, adam_step, load_checkpoint, msra_init, save_checkpoint

__all__ = [
    "Tensor",
    "finite_checks",
    "set_finite_checks",
    "AdamState",
    "ConvLayer",
    "ConvNet",
    "adam_step",
    "msra_init",
    "save_checkpoint",
    "load_checkpoint",
]

__version__ = "0.1.0"
