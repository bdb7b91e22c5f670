"""PSNR/SSIM evaluation and the frequency-domain degradation experiments
(component swapping between image pairs, local amplitude edits)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imageio import ImageBuffer
from .tensor import DimensionError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)  # BT.601


@dataclass(frozen=True)
class SSIMSpec:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0


def _pixels(img):
    return img.pixels if isinstance(img, ImageBuffer) else np.asarray(img, dtype=np.float64)


def psnr(a, b) -> float:
    """10*log10(1 / MSE) over all RGB samples; +inf for identical inputs."""
    pa, pb = _pixels(a), _pixels(b)
    if pa.shape != pb.shape:
        raise DimensionError(f"psnr shapes differ: {pa.shape} vs {pb.shape}")
    mse = float(np.mean((pa - pb) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(size, sigma):
    half = size // 2
    g = np.exp(-0.5 * (np.arange(size) - half) ** 2 / sigma**2)
    return g / g.sum()


def _filter_valid(plane, window):
    """Separable 'valid'-mode correlation with a 1-D window along both axes."""
    from numpy.lib.stride_tricks import sliding_window_view

    rows = sliding_window_view(plane, len(window), axis=0) @ window
    return sliding_window_view(rows, len(window), axis=1) @ window


def ssim(a, b, spec: SSIMSpec = SSIMSpec()) -> float:
    """Mean structural similarity on the luma plane, Gaussian-weighted moments."""
    pa, pb = _pixels(a), _pixels(b)
    if pa.shape != pb.shape:
        raise DimensionError(f"ssim shapes differ: {pa.shape} vs {pb.shape}")
    ya = pa @ LUMA_WEIGHTS if pa.ndim == 3 else pa
    yb = pb @ LUMA_WEIGHTS if pb.ndim == 3 else pb
    if min(ya.shape) < spec.window:
        raise DimensionError(f"image {ya.shape} smaller than the {spec.window}-pixel window")

    win = _gaussian_window(spec.window, spec.sigma)
    mu_a = _filter_valid(ya, win)
    mu_b = _filter_valid(yb, win)
    var_a = _filter_valid(ya * ya, win) - mu_a**2
    var_b = _filter_valid(yb * yb, win) - mu_b**2
    cov = _filter_valid(ya * yb, win) - mu_a * mu_b

    c1 = (spec.k1 * spec.dynamic_range) ** 2
    c2 = (spec.k2 * spec.dynamic_range) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


# ---------------------------------------------------------------------------
# spectral component experiments


_COMPONENTS = ("phase", "imaginary", "amplitude", "real")


def _swap_plane(fa, fb, which):
    if which == "amplitude":
        return np.abs(fb) * np.exp(1j * np.angle(fa)), np.abs(fa) * np.exp(1j * np.angle(fb))
    if which == "phase":
        return np.abs(fa) * np.exp(1j * np.angle(fb)), np.abs(fb) * np.exp(1j * np.angle(fa))
    if which == "real":
        return fb.real + 1j * fa.imag, fa.real + 1j * fb.imag
    if which == "imaginary":
        return fa.real + 1j * fb.imag, fb.real + 1j * fa.imag
    raise DimensionError(f"unknown component {which!r}; pick from {_COMPONENTS}")


def swap_components(a, b, which: str, clamp: bool = True):
    """Exchange one spectral component between two same-shape images.

    Per channel, both spectra are decomposed (polar for amplitude/phase,
    rectangular for real/imaginary), the named component is exchanged, and
    both are transformed back. Returns the modified (a', b')."""
    pa, pb = _pixels(a), _pixels(b)
    if pa.shape != pb.shape:
        raise DimensionError(f"swap shapes differ: {pa.shape} vs {pb.shape}")
    out_a = np.empty_like(pa)
    out_b = np.empty_like(pb)
    for ch in range(pa.shape[2]):
        fa = np.fft.fft2(pa[:, :, ch])
        fb = np.fft.fft2(pb[:, :, ch])
        ga, gb = _swap_plane(fa, fb, which)
        out_a[:, :, ch] = np.fft.ifft2(ga).real
        out_b[:, :, ch] = np.fft.ifft2(gb).real
    if clamp:
        out_a = np.clip(out_a, 0.0, 1.0)
        out_b = np.clip(out_b, 0.0, 1.0)
    return out_a, out_b


def modify_local_amplitude(a, region, gain: float, clamp: bool = True):
    """Scale the amplitude inside a half-spectrum region, phase untouched.

    ``region`` is (row_start, row_stop, col_start, col_stop) over the
    (H, W//2+1) half-spectrum. Rows in the self-conjugate columns are
    mirrored so the output stays real."""
    pa = _pixels(a)
    h, w = pa.shape[:2]
    ws = w // 2 + 1
    r0, r1, c0, c1 = region
    if not (0 <= r0 < r1 <= h and 0 <= c0 < c1 <= ws):
        raise DimensionError(f"region {region} outside the {(h, ws)} half-spectrum")

    mask = np.zeros((h, ws), dtype=bool)
    mask[r0:r1, c0:c1] = True
    mirror_rows = (h - np.arange(h)) % h
    for col in {0, w // 2 if w % 2 == 0 else None} - {None}:
        if col < ws:
            mask[:, col] |= mask[mirror_rows, col]

    out = np.empty_like(pa)
    for ch in range(pa.shape[2]):
        spec = np.fft.rfft2(pa[:, :, ch])
        spec[mask] *= gain
        out[:, :, ch] = np.fft.irfft2(spec, s=(h, w))
    if clamp:
        out = np.clip(out, 0.0, 1.0)
    return out
