import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def synthetic_scene(rng, h=48, w=48, lo=0.05, hi=0.95):
    """Deterministic textured scene: gradients, rectangles, sinusoidal detail."""
    yy, xx = np.mgrid[0:h, 0:w] / max(h, w)
    base = np.stack([0.25 + 0.4 * xx, 0.3 + 0.3 * yy, 0.35 + 0.25 * (xx + yy) / 2], axis=2)
    for _ in range(6):
        y0 = int(rng.integers(0, max(1, h - 8)))
        x0 = int(rng.integers(0, max(1, w - 8)))
        hh = int(rng.integers(4, max(5, h // 2)))
        ww = int(rng.integers(4, max(5, w // 2)))
        base[y0 : y0 + hh, x0 : x0 + ww] += rng.uniform(-0.2, 0.25, 3)
    tex = 0.05 * np.sin(2 * np.pi * (xx * int(rng.integers(3, 7)) + yy * int(rng.integers(2, 5))))
    return np.clip(base + tex[:, :, None], lo, hi)
