"""Dual-domain image dehazing with dark-channel-guided frequency modulation."""

from .network import DGFDNet, ModelConfig, build, flop_count, param_count
from .tensor import ComplexPair, ConvSpec, Tensor
from .training import TrainConfig, dual_domain_loss, train_loop

__all__ = [
    "ComplexPair",
    "ConvSpec",
    "DGFDNet",
    "ModelConfig",
    "Tensor",
    "TrainConfig",
    "build",
    "dual_domain_loss",
    "flop_count",
    "param_count",
    "train_loop",
]
