"""PNG image I/O and the in-memory RGB buffer used across the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numpy as np

from .tensor import Tensor


class ImageError(ValueError):
    pass


@dataclass
class ImageBuffer:
    """H x W x 3 RGB image with values in [0, 1]."""

    pixels: np.ndarray
    bit_depth: int = 8

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ImageError(f"expected HxWx3 pixels, got {px.shape}")
        if px.shape[0] < 16 or px.shape[1] < 16:
            raise ImageError(f"image dimensions {px.shape[:2]} below the 16-pixel minimum")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ImageError("pixel values must lie in [0, 1]")
        if self.bit_depth not in (8, 16):
            raise ImageError(f"unsupported bit depth {self.bit_depth}")
        self.pixels = px

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]


def load_image(path) -> ImageBuffer:
    """Read an 8- or 16-bit PNG (or any cv2-readable raster) as linear [0, 1] RGB."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageError(f"unreadable image file: {path}")
    if raw.dtype == np.uint8:
        depth, maxval = 8, 255.0
    elif raw.dtype == np.uint16:
        depth, maxval = 16, 65535.0
    else:
        raise ImageError(f"unsupported sample format {raw.dtype} in {path}")
    if raw.ndim == 2:
        raw = raw[:, :, None].repeat(3, axis=2)
    elif raw.shape[2] == 4:
        raw = raw[:, :, :3]
    rgb = raw[:, :, ::-1].astype(np.float64) / maxval
    return ImageBuffer(rgb, bit_depth=depth)


def save_image(img: ImageBuffer, path) -> None:
    """Write the buffer as PNG at its source bit depth (lossless for 8-bit round trips)."""
    maxval = 255.0 if img.bit_depth == 8 else 65535.0
    dtype = np.uint8 if img.bit_depth == 8 else np.uint16
    quant = np.clip(np.rint(img.pixels * maxval), 0, maxval).astype(dtype)
    bgr = quant[:, :, ::-1]
    if not cv2.imwrite(str(path), bgr):
        raise ImageError(f"failed to write image: {path}")


def load_depth(path) -> np.ndarray:
    """Read a single-channel depth map as an H x W array in [0, 1]."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageError(f"unreadable depth file: {path}")
    if raw.ndim == 3:
        raw = raw[:, :, 0]
    maxval = {np.dtype(np.uint8): 255.0, np.dtype(np.uint16): 65535.0}.get(raw.dtype)
    if maxval is None:
        raise ImageError(f"unsupported depth sample format {raw.dtype}")
    return raw.astype(np.float64) / maxval


def save_gray(values: np.ndarray, path) -> None:
    """Write an H x W array in [0, 1] as an 8-bit grayscale PNG."""
    quant = np.clip(np.rint(np.asarray(values) * 255.0), 0, 255).astype(np.uint8)
    if not cv2.imwrite(str(path), quant):
        raise ImageError(f"failed to write image: {path}")


def image_to_tensor(img: ImageBuffer, dtype=np.float32) -> Tensor:
    """(H, W, 3) buffer -> (1, 3, H, W) tensor."""
    return Tensor(img.pixels.transpose(2, 0, 1)[None].astype(dtype))


def tensor_to_image(x: Tensor, bit_depth: int = 8) -> ImageBuffer:
    """(1, 3, H, W) tensor -> buffer, clamped into [0, 1]."""
    arr = np.asarray(x.data if isinstance(x, Tensor) else x)
    if arr.ndim != 4 or arr.shape[0] != 1 or arr.shape[1] != 3:
        raise ImageError(f"expected a (1, 3, H, W) tensor, got {arr.shape}")
    px = np.clip(arr[0].transpose(1, 2, 0), 0.0, 1.0)
    return ImageBuffer(px, bit_depth=bit_depth)
