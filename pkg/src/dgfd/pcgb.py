"""Prior correction guidance branch.

Encodes the dark channel into per-stage features and walks them alongside the
main branch, fusing each block's feedback correction back in (closed loop).
Encoder stages run 1 -> 3 (the bottleneck belongs to the encoder schedule);
the decoder walks stages 2 -> 1 with pixel-shuffle upsampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .fusion import SKFusionBlock
from .layers import Conv2d, Module, PixelShuffleUpsample
from .tensor import ConfigError, DimensionError, Tensor

VARIANTS = ("full", "nofr", "daf", "pff")


@dataclass
class GuidanceState:
    """Per-forward guidance bookkeeping; owned exclusively by one forward pass."""

    initial: dict = field(default_factory=dict)   # stage -> initial dark channel feature
    prev: Tensor | None = None                    # last guidance emitted (pff fusion)


class PriorGuidance(Module):
    def __init__(self, base_channels, rng, variant="full", stage1_fusion=True,
                 dtype=np.float32):
        super().__init__()
        if variant not in VARIANTS:
            raise ConfigError(f"unknown PCGB variant {variant!r}")
        c = base_channels
        self.variant = variant
        self.embed_spatial = Conv2d(1, c, 5, rng, dtype=dtype)
        self.embed_mix = Conv2d(c, c, 1, rng, dtype=dtype)
        # stage transitions share parameters between initial-feature encoding
        # and feedback downsampling
        self.down_1to2 = Conv2d(c, 2 * c, 3, rng, stride=2, dtype=dtype)
        self.down_2to3 = Conv2d(2 * c, 4 * c, 3, rng, stride=2, dtype=dtype)
        if variant != "nofr":
            self.up_3to2 = PixelShuffleUpsample(4 * c, rng, dtype=dtype)
            self.up_2to1 = PixelShuffleUpsample(2 * c, rng, dtype=dtype)
            if variant != "daf":
                # the stage-1 encoder fusion only exists for multi-block stages
                if stage1_fusion:
                    self.enc_fuse_1 = SKFusionBlock(c, rng, dtype=dtype)
                self.enc_fuse_2 = SKFusionBlock(2 * c, rng, dtype=dtype)
                self.enc_fuse_3 = SKFusionBlock(4 * c, rng, dtype=dtype)
                self.dec_fuse_2 = SKFusionBlock(2 * c, rng, dtype=dtype)
                self.dec_fuse_1 = SKFusionBlock(c, rng, dtype=dtype)

    def _down(self, stage_from):
        return self.down_1to2 if stage_from == 1 else self.down_2to3

    def _up(self, stage_to):
        return self.up_2to1 if stage_to == 1 else self.up_3to2

    def _fuse(self, bank, stage, a, b):
        if self.variant == "daf":
            return a + b
        block = getattr(self, f"{bank}_fuse_{stage}")
        return block(a, b)

    def encode_prior(self, x_d: Tensor) -> GuidanceState:
        """Initial per-stage guidance features from a (B, 1, H, W) dark channel."""
        if x_d.ndim != 4 or x_d.shape[1] != 1:
            raise DimensionError(f"expected a (B, 1, H, W) dark channel, got {x_d.shape}")
        h, w = x_d.shape[2], x_d.shape[3]
        if h % 4 or w % 4:
            raise ConfigError(f"spatial extents {(h, w)} must be divisible by 4")
        state = GuidanceState()
        first = T.gelu(self.embed_mix(self.embed_spatial(x_d)))
        state.initial[1] = first
        if self.variant != "pff":  # pff never consults initial features past block one
            state.initial[2] = self.down_1to2(first)
            state.initial[3] = self.down_2to3(state.initial[2])
        return state

    def next_guidance_encoder(self, state: GuidanceState, stage: int, j: int,
                              feedback: Tensor | None) -> Tensor:
        if stage == 1 and j == 1:
            g = state.initial[1]
        elif self.variant == "nofr":
            g = state.initial[stage]
        else:
            if feedback is None:
                raise DimensionError(f"encoder position ({stage}, {j}) requires feedback")
            if self.variant == "pff":
                other = state.prev
                if j == 1:
                    feedback = self._down(stage - 1)(feedback)
                    other = self._down(stage - 1)(other)
                g = self._fuse("enc", stage, feedback, other)
            else:
                if j == 1:
                    feedback = self._down(stage - 1)(feedback)
                g = self._fuse("enc", stage, feedback, state.initial[stage])
        state.prev = g
        return g

    def next_guidance_decoder(self, state: GuidanceState, stage: int, j: int,
                              feedback: Tensor | None) -> Tensor:
        if self.variant == "nofr":
            g = state.initial[stage]
        else:
            if feedback is None:
                raise DimensionError(f"decoder position ({stage}, {j}) requires feedback")
            if self.variant == "pff":
                other = state.prev
                if j == 1:
                    feedback = self._up(stage)(feedback)
                    other = self._up(stage)(other)
                g = self._fuse("dec", stage, feedback, other)
            else:
                if j == 1:
                    feedback = self._up(stage)(feedback)
                g = self._fuse("dec", stage, feedback, state.initial[stage])
        state.prev = g
        return g

    def encode_flops(self, h, w):
        total = self.embed_spatial.flops(h, w) + self.embed_mix.flops(h, w)
        total += T.cost_act(self.embed_mix.spec.out_channels * h * w)
        if self.variant != "pff":
            total += self.down_1to2.flops(h, w) + self.down_2to3.flops(h // 2, w // 2)
        return total
