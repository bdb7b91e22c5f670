"""Full dehazing network: shallow head, three-scale encoder/decoder of
HAFM+MGAM blocks interleaved with the prior guidance branch, residual tail."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from . import tensor as T
from .fusion import SKFusionBlock
from .hafm import HAFMBlock
from .layers import Conv2d, Module, PixelShuffleUpsample
from .mgam import MGAMBlock
from .pcgb import PriorGuidance
from .priors import dark_channel_map
from .tensor import ConfigError, DimensionError, Tensor

# config-file / CLI names for the architecture ablation switches
ABLATION_FLAGS = {
    "hafm-s": ("hafm_variant", "spatial"),
    "hafm-f": ("hafm_variant", "frequency"),
    "hafm-ssa": ("hafm_variant", "self"),
    "mgam-3x3": ("mgam_variant", "k3"),
    "mgam-5x5": ("mgam_variant", "k5"),
    "mgam-nogate": ("mgam_variant", "nogate"),
    "mgam-noskip": ("mgam_variant", "noskip"),
    "pcgb-ssa": ("pcgb_variant", "bypass"),
    "pcgb-nofr": ("pcgb_variant", "nofr"),
    "pcgb-daf": ("pcgb_variant", "daf"),
    "pcgb-pff": ("pcgb_variant", "pff"),
}


TAIL_INIT_SCALE = 0.01


@dataclass
class ModelConfig:
    base_channels: int = 32
    blocks_per_stage: tuple = (2, 2, 4, 2, 2)
    kernel_set: tuple = (3, 5)
    dark_channel_patch: int = 15
    skip_fusion: str = "skfusion"  # or "add"
    hafm_variant: str = "full"     # full | spatial | frequency | self
    mgam_variant: str = "full"     # full | k3 | k5 | nogate | noskip
    pcgb_variant: str = "full"     # full | nofr | daf | pff | bypass
    seed: int = 0

    def __post_init__(self):
        self.blocks_per_stage = tuple(int(n) for n in self.blocks_per_stage)
        self.kernel_set = tuple(int(k) for k in self.kernel_set)
        if len(self.blocks_per_stage) != 5 or any(n < 1 for n in self.blocks_per_stage):
            raise ConfigError("blocks_per_stage must be five positive counts")
        b = self.blocks_per_stage
        if b[0] != b[4] or b[1] != b[3]:
            raise ConfigError("blocks_per_stage must be symmetric around the bottleneck")
        if not self.kernel_set or any(k not in (3, 5) for k in self.kernel_set):
            raise ConfigError("kernel_set must be a non-empty subset of {3, 5}")
        if self.skip_fusion not in ("skfusion", "add"):
            raise ConfigError(f"unknown skip_fusion {self.skip_fusion!r}")
        if self.hafm_variant not in ("full", "spatial", "frequency", "self"):
            raise ConfigError(f"unknown hafm_variant {self.hafm_variant!r}")
        if self.mgam_variant not in ("full", "k3", "k5", "nogate", "noskip"):
            raise ConfigError(f"unknown mgam_variant {self.mgam_variant!r}")
        if self.pcgb_variant not in ("full", "nofr", "daf", "pff", "bypass"):
            raise ConfigError(f"unknown pcgb_variant {self.pcgb_variant!r}")
        # self-attending HAFM and a bypassed guidance branch are one variant
        if self.hafm_variant == "self":
            self.pcgb_variant = "bypass"
        if self.pcgb_variant == "bypass":
            self.hafm_variant = "self"

    @property
    def mgam_kernels(self):
        if self.mgam_variant == "k3":
            return (3,)
        if self.mgam_variant == "k5":
            return (5,)
        return self.kernel_set

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @staticmethod
    def from_dict(d):
        known = {f.name for f in fields(ModelConfig)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return ModelConfig(**d)


def apply_ablation(config: ModelConfig, flag: str) -> ModelConfig:
    """Return a copy of ``config`` with one named ablation switch applied."""
    key = flag.lower()
    if key not in ABLATION_FLAGS:
        raise ConfigError(f"unknown ablation flag {flag!r}; known: {sorted(ABLATION_FLAGS)}")
    attr, value = ABLATION_FLAGS[key]
    d = config.to_dict()
    d[attr] = value
    if attr == "hafm_variant" and value != "self" and d["pcgb_variant"] == "bypass":
        d["pcgb_variant"] = "full"
    return ModelConfig.from_dict(d)


class DGFDBlock(Module):
    """One HAFM + MGAM pair; residual on the feature path at both halves."""

    def __init__(self, channels, rng, config: ModelConfig, dtype=np.float32,
                 feedback=True):
        super().__init__()
        self.hafm = HAFMBlock(channels, rng, variant=config.hafm_variant, dtype=dtype)
        self.mgam = MGAMBlock(
            channels, rng,
            kernels=config.mgam_kernels,
            gated=config.mgam_variant != "nogate",
            skip=config.mgam_variant != "noskip",
            feedback=feedback and config.pcgb_variant != "bypass",
            dtype=dtype,
        )

    def forward(self, x, guidance):
        x_hat_f, x_hat_d, m_sa = self.hafm(x, guidance)
        x_out, feedback = self.mgam(x_hat_f, x_hat_d)
        return x_out, feedback, m_sa

    def flops(self, h, w):
        return self.hafm.flops(h, w) + self.mgam.flops(h, w)


class DGFDNet(Module):
    def __init__(self, config: ModelConfig, rng, dtype=np.float32):
        super().__init__()
        c = config.base_channels
        self.config = config
        self.head = Conv2d(3, c, 3, rng, dtype=dtype)
        nb = config.blocks_per_stage
        self.enc1 = [DGFDBlock(c, rng, config, dtype) for _ in range(nb[0])]
        self.down1 = Conv2d(c, 2 * c, 3, rng, stride=2, dtype=dtype)
        self.enc2 = [DGFDBlock(2 * c, rng, config, dtype) for _ in range(nb[1])]
        self.down2 = Conv2d(2 * c, 4 * c, 3, rng, stride=2, dtype=dtype)
        self.bottleneck = [DGFDBlock(4 * c, rng, config, dtype) for _ in range(nb[2])]
        self.up1 = PixelShuffleUpsample(4 * c, rng, dtype=dtype)
        self.dec2 = [DGFDBlock(2 * c, rng, config, dtype) for _ in range(nb[3])]
        self.up2 = PixelShuffleUpsample(2 * c, rng, dtype=dtype)
        # nothing consumes the guidance feedback of the final block
        self.dec1 = [DGFDBlock(c, rng, config, dtype, feedback=j < nb[4] - 1)
                     for j in range(nb[4])]
        if config.skip_fusion == "skfusion":
            self.skip_fuse_2 = SKFusionBlock(2 * c, rng, dtype=dtype)
            self.skip_fuse_1 = SKFusionBlock(c, rng, dtype=dtype)
        if config.pcgb_variant != "bypass":
            self.guidance = PriorGuidance(c, rng, variant=config.pcgb_variant,
                                          stage1_fusion=nb[0] > 1, dtype=dtype)
        self.tail = Conv2d(c, 3, 3, rng, dtype=dtype)
        # the residual head starts near the identity (small but nonzero, so
        # every upstream parameter still receives gradient from step one)
        self.tail.weight.data *= TAIL_INIT_SCALE

    # -- forward -----------------------------------------------------------

    def _skip(self, index, skip, x):
        if self.config.skip_fusion == "add":
            return skip + x
        block = self.skip_fuse_2 if index == 2 else self.skip_fuse_1
        return block(skip, x)

    def forward(self, hazy: Tensor):
        """hazy (B, 3, H, W) -> (dehazed, residual, attention taps per block)."""
        if hazy.ndim != 4 or hazy.shape[1] != 3:
            raise DimensionError(f"expected a (B, 3, H, W) input, got {hazy.shape}")
        h, w = hazy.shape[2], hazy.shape[3]
        if h % 4 or w % 4:
            raise ConfigError(f"spatial extents {(h, w)} must be divisible by 4 (pad first)")

        guided = self.config.pcgb_variant != "bypass"
        state = None
        if guided:
            dc = Tensor(dark_channel_map(hazy.data, self.config.dark_channel_patch))
            state = self.guidance.encode_prior(dc)

        taps = {}
        feedback = None
        x = self.head(hazy)

        def run_block(block, x, seg, stage, j, decoder):
            nonlocal feedback
            g = None
            if guided:
                step = (self.guidance.next_guidance_decoder if decoder
                        else self.guidance.next_guidance_encoder)
                g = step(state, stage, j, feedback)
            x, fb, m_sa = block(x, g)
            if fb is not None:
                feedback = fb
            if m_sa is not None:
                taps[f"{seg}{stage}.b{j}"] = m_sa.detach()
            return x

        for j, blk in enumerate(self.enc1, 1):
            x = run_block(blk, x, "enc", 1, j, decoder=False)
        skip1 = x
        x = self.down1(x)
        for j, blk in enumerate(self.enc2, 1):
            x = run_block(blk, x, "enc", 2, j, decoder=False)
        skip2 = x
        x = self.down2(x)
        for j, blk in enumerate(self.bottleneck, 1):
            x = run_block(blk, x, "bot", 3, j, decoder=False)
        x = self.up1(x)
        x = self._skip(2, skip2, x)
        for j, blk in enumerate(self.dec2, 1):
            x = run_block(blk, x, "dec", 2, j, decoder=True)
        x = self.up2(x)
        x = self._skip(1, skip1, x)
        for j, blk in enumerate(self.dec1, 1):
            x = run_block(blk, x, "dec", 1, j, decoder=True)

        residual = self.tail(x)
        return hazy + residual, residual, taps

    # -- cost model --------------------------------------------------------

    def flops(self, h, w):
        """Analytic operation count for one image, mirroring ``forward``."""
        if h % 4 or w % 4:
            raise ConfigError("flops needs extents divisible by 4")
        cfg = self.config
        guided = cfg.pcgb_variant != "bypass"
        total = self.head.flops(h, w) + self.tail.flops(h, w)
        res = {1: (h, w), 2: (h // 2, w // 2), 3: (h // 4, w // 4)}

        if guided:
            pg = self.guidance
            total += pg.encode_flops(h, w)

            def guide_flops(stage, j, decoder, first_overall):
                if first_overall:
                    return 0
                if cfg.pcgb_variant == "nofr":
                    return 0
                cost = 0
                sh, sw = res[stage]
                if cfg.pcgb_variant == "pff":
                    if j == 1:
                        trans = pg._up(stage) if decoder else pg._down(stage - 1)
                        ph, pw = res[stage + 1] if decoder else res[stage - 1]
                        cost += 2 * trans.flops(ph, pw)
                elif j == 1:
                    trans = pg._up(stage) if decoder else pg._down(stage - 1)
                    ph, pw = res[stage + 1] if decoder else res[stage - 1]
                    cost += trans.flops(ph, pw)
                if cfg.pcgb_variant != "daf":
                    bank = "dec" if decoder else "enc"
                    cost += getattr(pg, f"{bank}_fuse_{stage}").flops(sh, sw)
                return cost

        schedule = [
            (self.enc1, 1, False), (self.enc2, 2, False), (self.bottleneck, 3, False),
            (self.dec2, 2, True), (self.dec1, 1, True),
        ]
        first = True
        for blocks, stage, decoder in schedule:
            sh, sw = res[stage]
            for j, blk in enumerate(blocks, 1):
                if guided:
                    total += guide_flops(stage, j, decoder, first)
                first = False
                total += blk.flops(sh, sw)

        total += self.down1.flops(h, w) + self.down2.flops(*res[2])
        total += self.up1.flops(*res[3]) + self.up2.flops(*res[2])
        if cfg.skip_fusion == "skfusion":
            total += self.skip_fuse_2.flops(*res[2]) + self.skip_fuse_1.flops(h, w)
        return total


def build(config: ModelConfig, seed: int | None = None, dtype=np.float32) -> DGFDNet:
    """Construct a network with deterministic Kaiming-uniform initialization."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    return DGFDNet(config, rng, dtype=dtype)


def param_count(net: DGFDNet) -> int:
    return sum(p.size for _, p in net.named_params())


def flop_count(config: ModelConfig, height: int, width: int) -> int:
    """Multiply-accumulate estimate of one forward pass at the given extent."""
    return build(config, seed=0).flops(height, width)


# reference figures for the published full-size configuration
REFERENCE_PARAMS = 2.08e6
REFERENCE_FLOPS = 13.65e9
REFERENCE_FLOPS_EXTENT = 256
