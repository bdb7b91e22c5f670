"""Dark channel prior extraction and synthetic haze generation.

The dark channel D(x) = min over a window of the per-pixel RGB minimum; in
haze-free outdoor images it sits near zero, and atmospheric scattering
raises it, so it serves as a per-pixel haze density proxy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .imageio import ImageBuffer
from .tensor import ConfigError, Tensor


@dataclass(frozen=True)
class DarkChannelSpec:
    """Window extent for the local minimum; replicate border handling."""

    patch: int = 15

    def __post_init__(self):
        if self.patch < 1 or self.patch % 2 == 0:
            raise ConfigError(f"dark channel patch must be odd and >= 1, got {self.patch}")


@dataclass
class HazeParams:
    """Atmospheric scattering model parameters: I = J*t + A*(1-t), t = exp(-beta*depth)."""

    atmospheric_light: tuple[float, float, float] = (0.8, 0.8, 0.8)
    beta: float = 1.0
    depth: np.ndarray = field(default=None)

    def __post_init__(self):
        a = np.asarray(self.atmospheric_light, dtype=np.float64)
        if a.shape != (3,) or a.min() <= 0.0 or a.max() > 1.0:
            raise ConfigError("atmospheric light must be an RGB triple in (0, 1]")
        if self.beta < 0:
            raise ConfigError("scattering coefficient beta must be >= 0")
        if self.depth is not None:
            d = np.asarray(self.depth, dtype=np.float64)
            if d.min() < 0.0 or d.max() > 1.0:
                raise ConfigError("depth map values must lie in [0, 1]")
            self.depth = d


def _window_min(plane: np.ndarray, patch: int) -> np.ndarray:
    """Separable sliding-window minimum with replicate borders."""
    if patch == 1:
        return plane
    r = patch // 2
    padded = np.pad(plane, ((r, r), (0, 0)), mode="edge")
    rows = sliding_window_view(padded, patch, axis=0).min(axis=-1)
    padded = np.pad(rows, ((0, 0), (r, r)), mode="edge")
    return sliding_window_view(padded, patch, axis=1).min(axis=-1)


def dark_channel(img: ImageBuffer, spec: DarkChannelSpec = DarkChannelSpec()) -> Tensor:
    """Dark channel of an RGB buffer as a (1, 1, H, W) tensor in [0, 1]."""
    per_pixel = img.pixels.min(axis=2)
    return Tensor(_window_min(per_pixel, spec.patch)[None, None])


def dark_channel_map(batch: np.ndarray, patch: int) -> np.ndarray:
    """Dark channel of a (B, 3, H, W) array -> (B, 1, H, W); used inside the network."""
    per_pixel = batch.min(axis=1)
    out = np.stack([_window_min(p, patch) for p in per_pixel])
    return out[:, None].astype(batch.dtype)


def synthesize_haze(clean: ImageBuffer, p: HazeParams) -> ImageBuffer:
    """Blend scene radiance with airlight through transmission t = exp(-beta*depth)."""
    depth = p.depth
    if depth is None:
        depth = np.zeros(clean.pixels.shape[:2])
    if depth.shape != clean.pixels.shape[:2]:
        raise ConfigError(f"depth shape {depth.shape} does not match image {clean.pixels.shape[:2]}")
    t = np.exp(-p.beta * depth)[:, :, None]
    a = np.asarray(p.atmospheric_light, dtype=np.float64)[None, None, :]
    hazy = clean.pixels * t + a * (1.0 - t)
    return ImageBuffer(np.clip(hazy, 0.0, 1.0), bit_depth=clean.bit_depth)


def depth_linear_ramp(height: int, width: int, lo: float = 0.1, hi: float = 1.0,
                      axis: int = 1) -> np.ndarray:
    """Deterministic depth fixture increasing linearly along the given axis."""
    n = width if axis == 1 else height
    ramp = np.linspace(lo, hi, n)
    return np.tile(ramp, (height, 1)) if axis == 1 else np.tile(ramp[:, None], (1, width))


def depth_radial(height: int, width: int, lo: float = 0.1, hi: float = 1.0) -> np.ndarray:
    """Depth fixture growing with distance from the image center."""
    yy, xx = np.mgrid[0:height, 0:width]
    cy, cx = (height - 1) / 2.0, (width - 1) / 2.0
    r = np.hypot(yy - cy, xx - cx)
    return lo + (hi - lo) * r / r.max()
