"""Haze-aware frequency modulator: guided spatial attention, then a spectral MLP.

The block alternates domains: a dark-channel bottleneck yields a pixel-level
haze confidence map that modulates the spatial path, whose result is then
reshaped in the frequency domain by independent per-component 1x1 MLPs. The
block output is residual on the feature path.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .layers import BatchNorm2d, Conv2d, Module
from .tensor import DimensionError, Tensor

VARIANTS = ("full", "spatial", "frequency", "self")


class HAFMBlock(Module):
    def __init__(self, channels, rng, variant="full", dtype=np.float32):
        super().__init__()
        if variant not in VARIANTS:
            raise T.ConfigError(f"unknown HAFM variant {variant!r}")
        self.channels = channels
        self.variant = variant
        self.bn = BatchNorm2d(channels, dtype=dtype)
        self.mixer = Conv2d(channels, channels, 1, rng, dtype=dtype)
        self.detail = Conv2d(channels, channels, 3, rng, groups=channels, dtype=dtype)
        if variant in ("full", "spatial"):
            mid = max(channels // 2, 1)
            self.guide_in = Conv2d(channels, mid, 1, rng, dtype=dtype)
            self.guide_out = Conv2d(mid, channels, 1, rng, dtype=dtype)
        elif variant == "self":
            self.self_attn = Conv2d(channels, channels, 1, rng, dtype=dtype)
        if variant in ("full", "frequency", "self"):
            self.freq_real_in = Conv2d(channels, channels, 1, rng, dtype=dtype)
            self.freq_real_out = Conv2d(channels, channels, 1, rng, dtype=dtype)
            self.freq_imag_in = Conv2d(channels, channels, 1, rng, dtype=dtype)
            self.freq_imag_out = Conv2d(channels, channels, 1, rng, dtype=dtype)
        self.fuse = Conv2d(2 * channels, channels, 1, rng, dtype=dtype)

    # -- guidance ----------------------------------------------------------

    def guidance_feature(self, x_d: Tensor) -> Tensor:
        """Intermediate dark channel feature (pre-sigmoid logits of the map)."""
        if self.variant == "frequency":
            return x_d  # attention disabled; pass the guidance through untouched
        return self.guide_out(T.gelu(self.guide_in(x_d)))

    def spatial_attention_map(self, x_d: Tensor) -> Tensor:
        """Haze confidence map in (0, 1), same shape as the feature tensor."""
        return T.sigmoid(self.guidance_feature(x_d))

    # -- forward -----------------------------------------------------------

    def forward(self, x_f: Tensor, x_d: Tensor | None):
        """Returns (residual feature output, intermediate dark channel feature, attention map)."""
        if self.variant != "self":
            if x_d is None:
                raise DimensionError("HAFM needs a guidance tensor unless self-attending")
            if x_d.shape != x_f.shape:
                raise DimensionError(f"feature {x_f.shape} vs guidance {x_d.shape} mismatch")

        x_m = self.mixer(self.bn(x_f))
        detail = self.detail(x_m)
        x_d_hat = None
        m_sa = None
        if self.variant == "frequency":
            x_d_hat = x_d
            x_spatial = detail + x_m
        else:
            if self.variant == "self":
                m_sa = T.sigmoid(self.self_attn(x_m))
            else:
                x_d_hat = self.guidance_feature(x_d)
                m_sa = T.sigmoid(x_d_hat)
            x_spatial = detail * m_sa + x_m

        if self.variant == "spatial":
            second = x_spatial
        else:
            spec = T.fft2(x_spatial)
            re = self.freq_real_out(T.gelu(self.freq_real_in(spec.real)))
            im = self.freq_imag_out(T.gelu(self.freq_imag_in(spec.imag)))
            second = T.ifft2(T.ComplexPair(re, im, spec.spatial))

        fused = T.gelu(self.fuse(T.concat([x_spatial, second], axis=1)))
        return x_f + fused, x_d_hat, m_sa

    def flops(self, h, w):
        c = self.channels
        total = self.bn.flops(h, w) + self.mixer.flops(h, w) + self.detail.flops(h, w)
        if self.variant in ("full", "spatial"):
            mid = self.guide_in.spec.out_channels
            total += self.guide_in.flops(h, w) + self.guide_out.flops(h, w)
            total += T.cost_act(mid * h * w)      # gelu in the bottleneck
            total += T.cost_act(c * h * w)        # sigmoid map
        elif self.variant == "self":
            total += self.self_attn.flops(h, w) + T.cost_act(c * h * w)
        if self.variant != "spatial":
            ws = w // 2 + 1
            total += 2 * T.cost_fft(c, h, w)
            for conv in (self.freq_real_in, self.freq_real_out, self.freq_imag_in, self.freq_imag_out):
                total += conv.flops(h, ws)
            total += 2 * T.cost_act(c * h * ws)   # gelu per component
        total += self.fuse.flops(h, w) + T.cost_act(c * h * w)
        return total


def hafm_forward(block: HAFMBlock, x_f: Tensor, x_d: Tensor | None):
    out, x_d_hat, _ = block(x_f, x_d)
    return out, x_d_hat


def spatial_attention_map(block: HAFMBlock, x_d: Tensor) -> Tensor:
    return block.spatial_attention_map(x_d)
