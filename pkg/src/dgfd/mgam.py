"""Multi-level gating aggregation: dual-kernel depth-wise stacks, hybrid gates,
a stabilizing skip, and channel-attention feedback for the guidance branch."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .fusion import ChannelAttentionBlock
from .layers import BatchNorm2d, Conv2d, Module
from .tensor import DimensionError, Tensor


class MGAMBlock(Module):
    def __init__(self, channels, rng, kernels=(3, 5), gated=True, skip=True,
                 feedback=True, dtype=np.float32):
        super().__init__()
        if not kernels:
            raise T.ConfigError("MGAM needs at least one kernel size")
        self.channels = channels
        self.kernels = tuple(kernels)
        self.gated = gated
        self.skip = skip
        self.bn = BatchNorm2d(channels, dtype=dtype)
        expand_out = 2 * channels if gated else channels
        self.expand = Conv2d(channels, expand_out, 1, rng, dtype=dtype)
        self.feature_convs = [
            Conv2d(channels, channels, k, rng, groups=channels, dtype=dtype) for k in self.kernels
        ]
        self.dilated_convs = [
            Conv2d(channels, channels, k, rng, dilation=2, groups=channels, dtype=dtype)
            for k in self.kernels
        ]
        if gated:
            self.gate_convs = [
                Conv2d(channels, channels, k, rng, groups=channels, dtype=dtype)
                for k in self.kernels
            ]
        self.dual_fuse = Conv2d(len(self.kernels) * channels, channels, 1, rng, dtype=dtype)
        self.multi_fuse = Conv2d((2 if skip else 1) * channels, channels, 1, rng, dtype=dtype)
        self.attention = ChannelAttentionBlock(channels, rng, dtype=dtype)
        self.out_conv = Conv2d(channels, channels, 1, rng, dtype=dtype)
        if feedback:
            self.feedback_conv = Conv2d(channels, channels, 1, rng, dtype=dtype)

    def multi_scale_features(self, x_fea: Tensor):
        """Per-kernel stacked depth-wise features (plain then dilation-2)."""
        return [dd(dc(x_fea)) for dc, dd in zip(self.feature_convs, self.dilated_convs)]

    def gate_signals(self, x_gate: Tensor):
        return [T.sigmoid(gc(x_gate)) for gc in self.gate_convs]

    def forward(self, x_hat_f: Tensor, x_hat_d: Tensor | None):
        if x_hat_d is not None and x_hat_d.shape != x_hat_f.shape:
            raise DimensionError(f"feature {x_hat_f.shape} vs guidance {x_hat_d.shape} mismatch")
        bn_x = self.bn(x_hat_f)
        expanded = self.expand(bn_x)
        if self.gated:
            x_fea, x_gate = T.split(expanded, [self.channels, self.channels], axis=1)
            gated = [f * g for f, g in zip(self.multi_scale_features(x_fea),
                                           self.gate_signals(x_gate))]
        else:
            gated = self.multi_scale_features(expanded)
        x_dual = T.gelu(self.dual_fuse(T.concat(gated, axis=1) if len(gated) > 1 else gated[0]))
        pre_fuse = T.concat([bn_x, x_dual], axis=1) if self.skip else x_dual
        x_mult = T.gelu(self.multi_fuse(pre_fuse))
        m_ca, _ = self.attention(x_mult)
        x_f_out = x_hat_f + self.out_conv(x_mult * m_ca)
        x_d_tilde = None
        if x_hat_d is not None and hasattr(self, "feedback_conv"):
            x_d_tilde = self.feedback_feature(x_hat_d, m_ca)
        return x_f_out, x_d_tilde

    def feedback_feature(self, x_hat_d: Tensor, m_ca: Tensor) -> Tensor:
        """Dark channel correction sent back to the guidance branch."""
        return self.feedback_conv(x_hat_d * m_ca)

    def flops(self, h, w):
        c = self.channels
        total = self.bn.flops(h, w) + self.expand.flops(h, w)
        for conv in self.feature_convs + self.dilated_convs:
            total += conv.flops(h, w)
        if self.gated:
            for conv in self.gate_convs:
                total += conv.flops(h, w) + T.cost_act(c * h * w)
        total += self.dual_fuse.flops(h, w) + T.cost_act(c * h * w)
        total += self.multi_fuse.flops(h, w) + T.cost_act(c * h * w)
        total += self.attention.flops(h, w)
        total += self.out_conv.flops(h, w)
        if hasattr(self, "feedback_conv"):
            total += self.feedback_conv.flops(h, w)
        return total


def mgam_forward(block: MGAMBlock, x_hat_f: Tensor, x_hat_d: Tensor | None):
    return block(x_hat_f, x_hat_d)


def feedback_feature(block: MGAMBlock, x_hat_d: Tensor, m_ca: Tensor) -> Tensor:
    return block.feedback_feature(x_hat_d, m_ca)
