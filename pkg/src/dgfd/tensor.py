"""Dense tensors with reverse-mode autodiff and the conv/FFT/norm primitives.

Tensors are numpy-backed, order <= 4, float32 by default (float64 for
gradient checking). Every differentiable op records a vector-Jacobian
closure on a per-forward tape; ``Tensor.backward`` replays it in reverse
topological order and frees the tape afterwards.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import as_strided
from scipy.special import erf


class DimensionError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ConfigError(ValueError):
    """Operation hyperparameters are inconsistent (groups, sizes, ...)."""


_grad_enabled = True


@contextmanager
def no_grad():
    """Disable tape recording inside the block (inference / oracle evals)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class FlopTally:
    """Accumulates the operation-count model: convs, BN, activations, FFTs."""

    def __init__(self):
        self.total = 0

    def add(self, n):
        self.total += int(n)


_flop_tally: FlopTally | None = None


@contextmanager
def count_flops():
    """Tally op costs (per the analytic cost model) for ops run inside."""
    global _flop_tally
    prev = _flop_tally
    _flop_tally = FlopTally()
    try:
        yield _flop_tally
    finally:
        _flop_tally = prev


# Cost model shared by runtime instrumentation and the analytic estimator.
# Convs are counted as multiply-accumulates; BN as 2 ops/element; activations
# as 1 op/element; a 2-D FFT of an H*W plane as 5*N*log2(N), N = H*W.

def cost_conv(cin, cout, kernel, groups, oh, ow):
    return oh * ow * cout * (cin // groups) * kernel * kernel


def cost_bn(numel):
    return 2 * numel


def cost_act(numel):
    return numel


def cost_fft(channels, h, w):
    n = h * w
    return int(channels * 5 * n * math.log2(n))


def _tally(n):
    if _flop_tally is not None:
        _flop_tally.add(n)


class Tensor:
    """N-dimensional real array with optional autodiff-tape participation."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        if arr.ndim > 4:
            raise DimensionError(f"tensor order {arr.ndim} exceeds 4")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._vjp = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def item(self):
        return self.data.item()

    def backward(self):
        """Reverse-mode accumulation from a scalar loss over the recorded tape."""
        if self.data.size != 1:
            raise DimensionError("backward requires a scalar (size-1) tensor")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._vjp is not None and node.grad is not None:
                grads = node._vjp(node.grad)
                for parent, g in zip(node._parents, grads):
                    if g is None or not parent.requires_grad:
                        continue
                    if parent.grad is None:
                        parent.grad = g.astype(parent.data.dtype, copy=False)
                    else:
                        parent.grad = parent.grad + g
        # free the tape; leaves keep their grads
        for node in topo:
            node._parents = ()
            node._vjp = None

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


def _make(data, parents, vjp):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._vjp = vjp
    return out


def _check_broadcast(a, b):
    if a.ndim != b.ndim:
        raise DimensionError(f"rank mismatch {a.shape} vs {b.shape}")
    for da, db in zip(a.shape, b.shape):
        if da != db and da != 1 and db != 1:
            raise DimensionError(f"shapes {a.shape} and {b.shape} only broadcast over singleton axes")


def _unbroadcast(g, shape):
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)
    out = a.data + b.data

    def vjp(gy):
        return _unbroadcast(gy, a.shape), _unbroadcast(gy, b.shape)

    return _make(out, (a, b), vjp)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)
    out = a.data - b.data

    def vjp(gy):
        return _unbroadcast(gy, a.shape), -_unbroadcast(gy, b.shape)

    return _make(out, (a, b), vjp)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b)
    out = a.data * b.data

    def vjp(gy):
        ga = _unbroadcast(gy * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(gy * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return _make(out, (a, b), vjp)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    out = a.data * np.asarray(s, dtype=a.dtype)

    def vjp(gy):
        return (gy * s,)

    return _make(out, (a,), vjp)


def absolute(a: Tensor) -> Tensor:
    out = np.abs(a.data)

    def vjp(gy):
        return (gy * np.sign(a.data),)

    return _make(out, (a,), vjp)


def mean_all(a: Tensor) -> Tensor:
    out = a.data.mean()
    n = a.data.size

    def vjp(gy):
        return (np.full_like(a.data, gy / n),)

    return _make(out, (a,), vjp)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over the two spatial axes, keeping (B, C, 1, 1)."""
    if x.ndim != 4:
        raise DimensionError("global_avg_pool expects a 4-order tensor")
    out = x.data.mean(axis=(2, 3), keepdims=True)
    hw = x.shape[2] * x.shape[3]

    def vjp(gy):
        return (np.broadcast_to(gy / hw, x.shape).copy(),)

    return _make(out, (x,), vjp)


def concat(tensors, axis: int) -> Tensor:
    if not tensors:
        raise DimensionError("concat of empty list")
    nd = tensors[0].ndim
    for t in tensors:
        if t.ndim != nd:
            raise DimensionError("concat rank mismatch")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]

    def vjp(gy):
        grads = []
        start = 0
        for s in sizes:
            idx = [slice(None)] * nd
            idx[axis] = slice(start, start + s)
            grads.append(gy[tuple(idx)])
            start += s
        return tuple(grads)

    return _make(out, tuple(tensors), vjp)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    out = x.data[idx].copy()

    def vjp(gy):
        g = np.zeros_like(x.data)
        g[idx] = gy
        return (g,)

    return _make(out, (x,), vjp)


def split(x: Tensor, sizes, axis: int):
    if sum(sizes) != x.shape[axis]:
        raise DimensionError(f"split sizes {sizes} do not sum to extent {x.shape[axis]}")
    outs = []
    start = 0
    for s in sizes:
        outs.append(narrow(x, axis, start, s))
        start += s
    return tuple(outs)


# ---------------------------------------------------------------------------
# activations


def _gelu_forward(x):
    # exact Gaussian-CDF form x * Phi(x)
    phi = 0.5 * (1.0 + erf(x / np.sqrt(np.asarray(2.0, dtype=x.dtype))))
    return x * phi, phi


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def activation(x: Tensor, kind: str) -> Tensor:
    _tally(cost_act(x.size))
    if kind == "gelu":
        out, phi = _gelu_forward(x.data)

        def vjp(gy):
            pdf = np.exp(-0.5 * x.data * x.data) / np.sqrt(np.asarray(2.0 * np.pi, dtype=x.dtype))
            return (gy * (phi + x.data * pdf),)

    elif kind == "sigmoid":
        out = _sigmoid(x.data)

        def vjp(gy):
            return (gy * out * (1.0 - out),)

    elif kind == "relu":
        out = np.maximum(x.data, 0)

        def vjp(gy):
            return (gy * (x.data > 0),)

    else:
        raise ConfigError(f"unknown activation kind {kind!r}")
    return _make(out, (x,), vjp)


def gelu(x):
    return activation(x, "gelu")


def sigmoid(x):
    return activation(x, "sigmoid")


def relu(x):
    return activation(x, "relu")


# ---------------------------------------------------------------------------
# convolution


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of a 2-D convolution; groups == in_channels gives depth-wise."""

    in_channels: int
    out_channels: int
    kernel: int = 1
    stride: int = 1
    dilation: int = 1
    padding: int = 0
    groups: int = 1

    def __post_init__(self):
        if self.in_channels % self.groups or self.out_channels % self.groups:
            raise ConfigError(
                f"groups={self.groups} must divide in={self.in_channels} and out={self.out_channels}"
            )

    def out_extent(self, n: int) -> int:
        return (n + 2 * self.padding - self.dilation * (self.kernel - 1) - 1) // self.stride + 1

    @staticmethod
    def same(in_channels, out_channels, kernel, stride=1, dilation=1, groups=1):
        """Padding that preserves spatial extent at stride 1 (halves it at stride 2)."""
        pad = dilation * (kernel - 1) // 2
        return ConvSpec(in_channels, out_channels, kernel, stride, dilation, pad, groups)


def _conv_windows(xp, kernel, stride, dilation, oh, ow):
    b, c, _, _ = xp.shape
    sb, sc, sh, sw = xp.strides
    shape = (b, c, kernel, kernel, oh, ow)
    strides = (sb, sc, sh * dilation, sw * dilation, sh * stride, sw * stride)
    return as_strided(xp, shape=shape, strides=strides, writeable=False)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None, spec: ConvSpec) -> Tensor:
    if x.ndim != 4:
        raise DimensionError("conv2d expects a 4-order input")
    b, c, h, w = x.shape
    if c != spec.in_channels:
        raise DimensionError(f"input has {c} channels, spec expects {spec.in_channels}")
    cg = spec.in_channels // spec.groups
    if weight.shape != (spec.out_channels, cg, spec.kernel, spec.kernel):
        raise DimensionError(f"weight shape {weight.shape} does not match {spec}")
    oh, ow = spec.out_extent(h), spec.out_extent(w)
    if oh < 1 or ow < 1:
        raise DimensionError(f"conv output extent {(oh, ow)} is empty for input {(h, w)}")
    _tally(b * cost_conv(spec.in_channels, spec.out_channels, spec.kernel, spec.groups, oh, ow))

    k, s, d, p, g = spec.kernel, spec.stride, spec.dilation, spec.padding, spec.groups
    wd = weight.data

    if k == 1 and s == 1 and p == 0 and g == 1:
        out = np.einsum("oc,bchw->bohw", wd[:, :, 0, 0], x.data, optimize=True)
        if bias is not None:
            out += bias.data[None, :, None, None]

        def vjp(gy):
            gw = None
            if weight.requires_grad:
                gw = np.einsum("bohw,bchw->oc", gy, x.data, optimize=True)[:, :, None, None]
            gx = None
            if x.requires_grad:
                gx = np.einsum("oc,bohw->bchw", wd[:, :, 0, 0], gy, optimize=True)
            gb = gy.sum(axis=(0, 2, 3)) if bias is not None and bias.requires_grad else None
            return (gx, gw, gb) if bias is not None else (gx, gw)

        parents = (x, weight, bias) if bias is not None else (x, weight)
        return _make(out, parents, vjp)

    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p))) if p else x.data

    if g == c and spec.out_channels == c:
        # depth-wise: accumulate one vectorized slice product per kernel tap
        taps = [
            (kh, kw,
             slice(kh * d, kh * d + (oh - 1) * s + 1, s),
             slice(kw * d, kw * d + (ow - 1) * s + 1, s))
            for kh in range(k) for kw in range(k)
        ]
        out = np.zeros((b, c, oh, ow), dtype=x.dtype)
        for kh, kw, rows, cols in taps:
            out += wd[:, 0, kh, kw][None, :, None, None] * xp[:, :, rows, cols]
        if bias is not None:
            out += bias.data[None, :, None, None]

        def vjp(gy):
            gw = None
            if weight.requires_grad:
                gw = np.empty_like(wd)
                for kh, kw, rows, cols in taps:
                    gw[:, 0, kh, kw] = (gy * xp[:, :, rows, cols]).sum(axis=(0, 2, 3))
            gx = None
            if x.requires_grad:
                gxp = np.zeros_like(xp)
                for kh, kw, rows, cols in taps:
                    gxp[:, :, rows, cols] += wd[:, 0, kh, kw][None, :, None, None] * gy
                gx = gxp[:, :, p : p + h, p : p + w] if p else gxp
            gb = gy.sum(axis=(0, 2, 3)) if bias is not None and bias.requires_grad else None
            return (gx, gw, gb) if bias is not None else (gx, gw)

        parents = (x, weight, bias) if bias is not None else (x, weight)
        return _make(out, parents, vjp)

    win = _conv_windows(xp, k, s, d, oh, ow)
    if g == 1:
        out = np.einsum("ockl,bcklij->boij", wd, win, optimize=True)
    else:
        og = spec.out_channels // g
        wg = wd.reshape(g, og, cg, k, k)
        wing = win.reshape(b, g, cg, k, k, oh, ow)
        out = np.einsum("gockl,bgcklij->bgoij", wg, wing, optimize=True).reshape(
            b, spec.out_channels, oh, ow
        )
    if bias is not None:
        out += bias.data[None, :, None, None]

    def vjp(gy):
        gw = None
        if weight.requires_grad:
            if g == 1:
                gw = np.einsum("boij,bcklij->ockl", gy, win, optimize=True)
            else:
                og = spec.out_channels // g
                gyg = gy.reshape(b, g, og, oh, ow)
                wing = win.reshape(b, g, cg, k, k, oh, ow)
                gw = np.einsum("bgoij,bgcklij->gockl", gyg, wing, optimize=True).reshape(
                    spec.out_channels, cg, k, k
                )
        gx = None
        if x.requires_grad:
            if g == 1:
                gwin = np.einsum("ockl,boij->bcklij", wd, gy, optimize=True)
            else:
                og = spec.out_channels // g
                wg = wd.reshape(g, og, cg, k, k)
                gyg = gy.reshape(b, g, og, oh, ow)
                gwin = np.einsum("gockl,bgoij->bgcklij", wg, gyg, optimize=True).reshape(
                    b, c, k, k, oh, ow
                )
            gxp = np.zeros_like(xp)
            for kh in range(k):
                rows = slice(kh * d, kh * d + (oh - 1) * s + 1, s)
                for kw in range(k):
                    cols = slice(kw * d, kw * d + (ow - 1) * s + 1, s)
                    gxp[:, :, rows, cols] += gwin[:, :, kh, kw]
            gx = gxp[:, :, p : p + h, p : p + w] if p else gxp
        gb = gy.sum(axis=(0, 2, 3)) if bias is not None and bias.requires_grad else None
        return (gx, gw, gb) if bias is not None else (gx, gw)

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return _make(out, parents, vjp)


# ---------------------------------------------------------------------------
# batch normalization


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, running_mean, running_var,
               training: bool, eps: float = 1e-5, momentum: float = 0.1) -> Tensor:
    if x.ndim != 4:
        raise DimensionError("batch_norm expects a 4-order input")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise DimensionError("per-channel affine parameters must have length C")
    _tally(cost_bn(x.size))

    if training:
        mu = x.data.mean(axis=(0, 2, 3))
        var = x.data.var(axis=(0, 2, 3))
        n = x.data.size // c
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        unbiased = var * (n / (n - 1)) if n > 1 else var
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
    else:
        mu = running_mean.astype(x.dtype)
        var = running_var.astype(x.dtype)

    inv_std = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.dtype))
    xhat = (x.data - mu[None, :, None, None]) * inv_std[None, :, None, None]
    out = gamma.data[None, :, None, None] * xhat + beta.data[None, :, None, None]

    def vjp(gy):
        ggamma = (gy * xhat).sum(axis=(0, 2, 3)) if gamma.requires_grad else None
        gbeta = gy.sum(axis=(0, 2, 3)) if beta.requires_grad else None
        gx = None
        if x.requires_grad:
            gscaled = gy * gamma.data[None, :, None, None]
            if training:
                m_g = gscaled.mean(axis=(0, 2, 3), keepdims=True)
                m_gx = (gscaled * xhat).mean(axis=(0, 2, 3), keepdims=True)
                gx = inv_std[None, :, None, None] * (gscaled - m_g - xhat * m_gx)
            else:
                gx = gscaled * inv_std[None, :, None, None]
        return gx, ggamma, gbeta

    return _make(out, (x, gamma, beta), vjp)


# ---------------------------------------------------------------------------
# Fourier transforms (real-input half-spectrum convention)


@dataclass
class ComplexPair:
    """Half-spectrum of a real 2-D transform: (B, C, H, W//2+1) real/imag parts."""

    real: Tensor
    imag: Tensor
    spatial: tuple[int, int] = field(default=None)

    def __post_init__(self):
        if self.real.shape != self.imag.shape:
            raise DimensionError("real/imag parts must share a shape")


def _halfspec_adjoint(g, h, w, imaginary):
    """Gradient w.r.t. real input for a cotangent on stored spectrum bins."""
    b, c, _, ws = g.shape
    cplx = np.complex128 if g.dtype == np.float64 else np.complex64
    full = np.zeros((b, c, h, w), dtype=cplx)
    full[:, :, :, :ws] = 1j * g if imaginary else g
    return np.fft.ifft2(full, axes=(2, 3)).real * (h * w)


def fft2(x: Tensor) -> ComplexPair:
    """Unnormalized 2-D DFT of a real (B, C, H, W) tensor, storing W//2+1 columns."""
    if x.ndim != 4:
        raise DimensionError("fft2 expects a 4-order input")
    _, _, h, w = x.shape
    _tally(x.shape[0] * cost_fft(x.shape[1], h, w))
    spec = np.fft.rfft2(x.data, axes=(2, 3))
    re = np.ascontiguousarray(spec.real)
    im = np.ascontiguousarray(spec.imag)

    def vjp_real(gy):
        return (_halfspec_adjoint(gy, h, w, imaginary=False),)

    def vjp_imag(gy):
        return (_halfspec_adjoint(gy, h, w, imaginary=True),)

    return ComplexPair(_make(re, (x,), vjp_real), _make(im, (x,), vjp_imag), (h, w))


def _column_weights(h, w, dtype):
    # conjugate-mirrored interior columns represent two full-spectrum bins
    ws = w // 2 + 1
    wts = np.full(ws, 2.0, dtype=dtype)
    wts[0] = 1.0
    if w % 2 == 0:
        wts[-1] = 1.0
    return wts


def ifft2(f: ComplexPair, spatial_shape=None) -> Tensor:
    """Inverse of :func:`fft2` (1/(H*W) normalization), exact for odd extents."""
    if spatial_shape is None:
        spatial_shape = f.spatial
    if spatial_shape is None:
        raise DimensionError("ifft2 needs the original spatial shape")
    h, w = spatial_shape
    b, c, hs, ws = f.real.shape
    if hs != h or ws != w // 2 + 1:
        raise DimensionError(f"half-spectrum {f.real.shape} does not match spatial {(h, w)}")
    _tally(b * cost_fft(c, h, w))

    cplx = np.complex128 if f.real.dtype == np.float64 else np.complex64
    full = np.zeros((b, c, h, w), dtype=cplx)
    full[:, :, :, :ws] = f.real.data + 1j * f.imag.data
    lmax = (w - 1) // 2
    if lmax >= 1:
        rows = (h - np.arange(h)) % h
        # F[k, W-l] = conj(F[(H-k) % H, l]) for interior columns l = 1..lmax
        full[:, :, :, w - 1 : w - lmax - 1 : -1] = np.conj(full[:, :, rows, 1 : lmax + 1])
    out = np.fft.ifft2(full, axes=(2, 3)).real

    wts = _column_weights(h, w, f.real.dtype)[None, None, None, :]
    inv_n = 1.0 / (h * w)

    def vjp(gy):
        spec = np.fft.fft2(gy, axes=(2, 3))[:, :, :, :ws]
        scale_ = wts * inv_n
        gr = (scale_ * spec.real).astype(gy.dtype) if f.real.requires_grad else None
        gi = (scale_ * spec.imag).astype(gy.dtype) if f.imag.requires_grad else None
        return gr, gi

    return _make(out, (f.real, f.imag), vjp)


# ---------------------------------------------------------------------------
# pixel shuffle


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """(B, C*r^2, H, W) -> (B, C, rH, rW); channel i*r+j lands at offset (i, j)."""
    if x.ndim != 4:
        raise DimensionError("pixel_shuffle expects a 4-order input")
    b, c, h, w = x.shape
    if c % (r * r):
        raise ConfigError(f"channels {c} not divisible by r^2 = {r * r}")
    co = c // (r * r)
    out = (
        x.data.reshape(b, co, r, r, h, w)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(b, co, h * r, w * r)
    )

    def vjp(gy):
        g = (
            gy.reshape(b, co, h, r, w, r)
            .transpose(0, 1, 3, 5, 2, 4)
            .reshape(b, c, h, w)
        )
        return (g,)

    return _make(np.ascontiguousarray(out), (x,), vjp)


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    if x.ndim != 4:
        raise DimensionError("pixel_unshuffle expects a 4-order input")
    b, c, h, w = x.shape
    if h % r or w % r:
        raise ConfigError(f"spatial extents {(h, w)} not divisible by r = {r}")
    ho, wo = h // r, w // r
    out = (
        x.data.reshape(b, c, ho, r, wo, r)
        .transpose(0, 1, 3, 5, 2, 4)
        .reshape(b, c * r * r, ho, wo)
    )

    def vjp(gy):
        g = (
            gy.reshape(b, c, r, r, ho, wo)
            .transpose(0, 1, 4, 2, 5, 3)
            .reshape(b, c, h, w)
        )
        return (g,)

    return _make(np.ascontiguousarray(out), (x,), vjp)


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckReport:
    name: str
    max_rel_err: float
    checked: int
    tol: float

    @property
    def passed(self):
        return self.max_rel_err < self.tol


def grad_check(f, x: Tensor, h: float = 1e-5, tol: float = 1e-4,
               sample: int | None = None, rng=None, name: str = "") -> GradCheckReport:
    """Compare analytic gradients of scalar-valued ``f`` against central differences.

    Runs in the tensor's own precision; call with float64 data for tight
    tolerances. ``sample`` limits the number of coordinates probed (all when
    None).
    """
    x.zero_grad()
    y = f(x)
    if y.data.size != 1:
        raise DimensionError("grad_check requires a scalar-valued function")
    y.backward()
    analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()

    flat = x.data.reshape(-1)
    n = flat.size
    if sample is not None and sample < n:
        rng = rng or np.random.default_rng(0)
        idx = rng.choice(n, size=sample, replace=False)
    else:
        idx = np.arange(n)

    max_err = 0.0
    with no_grad():
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f(x).data)
            flat[i] = orig - h
            fm = float(f(x).data)
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * h)
            a = analytic.reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            if err > max_err:
                max_err = err
    return GradCheckReport(name=name, max_rel_err=float(max_err), checked=len(idx), tol=tol)
