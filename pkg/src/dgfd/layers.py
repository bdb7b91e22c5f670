"""Minimal parameter-container layer on top of the tensor core.

Modules discover parameters and child modules through attribute insertion
order, which makes parameter enumeration deterministic — a requirement for
bit-exact checkpoints.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import ConfigError, ConvSpec, Tensor


class Module:
    """Base container; subclasses assign Tensors / Modules / lists as attributes."""

    def __init__(self):
        self.training = True

    def _entries(self):
        for name, val in vars(self).items():
            if name == "training":
                continue
            yield name, val

    def named_params(self, prefix=""):
        for name, val in self._entries():
            full = f"{prefix}{name}"
            if isinstance(val, Tensor) and val.requires_grad:
                yield full, val
            elif isinstance(val, Module):
                yield from val.named_params(f"{full}.")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_params(f"{full}.{i}.")

    def named_buffers(self, prefix=""):
        own = getattr(self, "_buffers", None)
        if own:
            for name, buf in own.items():
                yield f"{prefix}{name}", buf
        for name, val in self._entries():
            full = f"{prefix}{name}"
            if isinstance(val, Module):
                yield from val.named_buffers(f"{full}.")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_buffers(f"{full}.{i}.")

    def params(self):
        return [p for _, p in self.named_params()]

    def modules(self):
        yield self
        for _, val in self._entries():
            if isinstance(val, Module):
                yield from val.modules()
            elif isinstance(val, (list, tuple)):
                for item in val:
                    if isinstance(item, Module):
                        yield from item.modules()

    def train(self, mode=True):
        for m in self.modules():
            m.training = mode
        return self

    def eval(self):
        return self.train(False)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def kaiming_uniform(rng, shape, fan_in, dtype):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv2d(Module):
    """2-D convolution; padding defaults to 'same' for stride 1."""

    def __init__(self, in_channels, out_channels, kernel, rng, stride=1, dilation=1,
                 groups=1, bias=True, padding=None, dtype=np.float32):
        super().__init__()
        if padding is None:
            padding = dilation * (kernel - 1) // 2
        self.spec = ConvSpec(in_channels, out_channels, kernel, stride, dilation, padding, groups)
        cg = in_channels // groups
        fan_in = cg * kernel * kernel
        self.weight = Tensor(
            kaiming_uniform(rng, (out_channels, cg, kernel, kernel), fan_in, dtype),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True) if bias else None

    def forward(self, x):
        return T.conv2d(x, self.weight, self.bias, self.spec)

    def flops(self, h, w):
        s = self.spec
        return T.cost_conv(s.in_channels, s.out_channels, s.kernel, s.groups,
                           s.out_extent(h), s.out_extent(w))


class BatchNorm2d(Module):
    def __init__(self, channels, dtype=np.float32, eps=1e-5, momentum=0.1):
        super().__init__()
        self.eps = eps
        self.momentum = momentum
        self.gamma = Tensor(np.ones(channels, dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
        self._buffers = {
            "running_mean": np.zeros(channels, dtype=dtype),
            "running_var": np.ones(channels, dtype=dtype),
        }

    @property
    def running_mean(self):
        return self._buffers["running_mean"]

    @property
    def running_var(self):
        return self._buffers["running_var"]

    def forward(self, x):
        return T.batch_norm(x, self.gamma, self.beta, self.running_mean, self.running_var,
                            training=self.training, eps=self.eps, momentum=self.momentum)

    def flops(self, h, w):
        return T.cost_bn(self.gamma.size * h * w)


class PixelShuffleUpsample(Module):
    """1x1 conv doubling channels, then r=2 shuffle: (B, C, H, W) -> (B, C/2, 2H, 2W)."""

    def __init__(self, in_channels, rng, dtype=np.float32):
        super().__init__()
        if in_channels % 2:
            raise ConfigError("upsample needs an even channel count")
        self.conv = Conv2d(in_channels, 2 * in_channels, 1, rng, dtype=dtype)

    def forward(self, x):
        return T.pixel_shuffle(self.conv(x), 2)

    def flops(self, h, w):
        return self.conv.flops(h, w)
