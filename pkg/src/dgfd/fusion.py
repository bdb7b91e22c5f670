"""Shared attention/fusion blocks: selective-kernel fusion and channel attention."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .layers import Conv2d, Module
from .tensor import DimensionError, Tensor


class SKFusionBlock(Module):
    """Two-branch selective fusion: pooled statistics pick convex per-channel weights.

    out = f2 + a1 * (f1 - f2) with a1 = softmax branch weight, so equal inputs
    pass through bit-exactly regardless of parameters.
    """

    def __init__(self, channels, rng, reduction=8, dtype=np.float32):
        super().__init__()
        hidden = max(channels // reduction, 1)
        self.squeeze = Conv2d(channels, hidden, 1, rng, dtype=dtype)
        self.expand = Conv2d(hidden, 2 * channels, 1, rng, dtype=dtype)
        self.channels = channels

    def branch_weight(self, f1: Tensor, f2: Tensor) -> Tensor:
        """First-branch softmax weight a1 in (0, 1), shape (B, C, 1, 1)."""
        pooled = T.global_avg_pool(f1 + f2)
        z = self.expand(T.gelu(self.squeeze(pooled)))
        z1, z2 = T.split(z, [self.channels, self.channels], axis=1)
        # two-branch softmax: a1 = exp(z1) / (exp(z1) + exp(z2)) = sigmoid(z1 - z2)
        return T.sigmoid(z1 - z2)

    def forward(self, f1: Tensor, f2: Tensor) -> Tensor:
        if f1.shape != f2.shape:
            raise DimensionError(f"sk_fuse inputs differ: {f1.shape} vs {f2.shape}")
        a1 = self.branch_weight(f1, f2)
        return f2 + a1 * (f1 - f2)

    def flops(self, h, w):
        hidden = self.squeeze.spec.out_channels
        return self.squeeze.flops(1, 1) + self.expand.flops(1, 1) + T.cost_act(hidden) + T.cost_act(self.channels)


def sk_fuse(block: SKFusionBlock, f1: Tensor, f2: Tensor) -> Tensor:
    return block(f1, f2)


class ChannelAttentionBlock(Module):
    """Squeeze-excite gate: pooled features -> bottleneck MLP -> sigmoid map in (0,1)^C."""

    def __init__(self, channels, rng, reduction=8, dtype=np.float32):
        super().__init__()
        hidden = max(channels // reduction, 2)
        self.squeeze = Conv2d(channels, hidden, 1, rng, dtype=dtype)
        # keep the ReLU bottleneck initially active so the gate trains from step one
        self.squeeze.bias.data[...] = 0.1
        self.expand = Conv2d(hidden, channels, 1, rng, dtype=dtype)
        self.channels = channels

    def forward(self, x: Tensor):
        pooled = T.global_avg_pool(x)
        m_ca = T.sigmoid(self.expand(T.relu(self.squeeze(pooled))))
        return m_ca, x * m_ca

    def flops(self, h, w):
        hidden = self.squeeze.spec.out_channels
        return self.squeeze.flops(1, 1) + self.expand.flops(1, 1) + T.cost_act(hidden) + T.cost_act(self.channels)


def channel_attention(block: ChannelAttentionBlock, x: Tensor):
    return block(x)
