"""Sixty-four-bit gradient verification: every primitive and each composed
block is checked against central finite differences."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .fusion import ChannelAttentionBlock, SKFusionBlock
from .hafm import HAFMBlock
from .mgam import MGAMBlock
from .network import ModelConfig, build
from .tensor import ConvSpec, GradCheckReport, Tensor, grad_check
from .training import dual_domain_loss

F64 = np.float64


def _sq_mean(y):
    return T.mean_all(T.mul(y, y))


def _rand(rng, shape, lo=-1.0, hi=1.0):
    return Tensor(rng.uniform(lo, hi, shape).astype(F64), requires_grad=True)


def _check_params(reports, name, loss_fn, params, sample, rng):
    for pname, p in params:
        n = None if sample is None else min(sample, p.size)
        reports.append(grad_check(lambda _: loss_fn(), p, sample=n, rng=rng,
                                  name=f"{name}[{pname}]"))


def run_gradient_suite(net_sample: int = 2, verbose: bool = False):
    """Returns a list of GradCheckReport; every report must pass (< 1e-4 rel)."""
    rng = np.random.default_rng(20240501)
    reports = []

    def add(name, f, x, sample=None):
        reports.append(grad_check(f, x, sample=sample, rng=rng, name=name))
        if verbose:
            r = reports[-1]
            print(f"  {r.name:<42} max rel err {r.max_rel_err:.3e}")

    # --- convolution, all kernel/stride/dilation/group shapes the network uses
    conv_cases = [
        ("conv 1x1 s1", 1, 1, 1, False),
        ("conv 3x3 s1", 3, 1, 1, False),
        ("conv 3x3 s2", 3, 2, 1, False),
        ("conv 3x3 s1 d2 dw", 3, 1, 2, True),
        ("conv 5x5 s1 dw", 5, 1, 1, True),
        ("conv 5x5 s1 d2 dw", 5, 1, 2, True),
        ("conv 5x5 s1 dense", 5, 1, 1, False),
    ]
    for name, k, s, d, dw in conv_cases:
        cin = 4 if dw else 3
        cout = cin if dw else 4
        groups = cin if dw else 1
        spec = ConvSpec.same(cin, cout, k, stride=s, dilation=d, groups=groups)
        x = _rand(rng, (2, cin, 6, 6))
        w = _rand(rng, (cout, cin // groups, k, k))
        b = _rand(rng, (cout,))
        add(f"{name} wrt x", lambda _: _sq_mean(T.conv2d(x, w, b, spec)), x)
        add(f"{name} wrt w", lambda _: _sq_mean(T.conv2d(x, w, b, spec)), w)
        add(f"{name} wrt b", lambda _: _sq_mean(T.conv2d(x, w, b, spec)), b)

    # --- activations (relu input kept away from its kink)
    x = _rand(rng, (2, 3, 5, 5))
    add("gelu", lambda t: _sq_mean(T.gelu(t)), x)
    add("sigmoid", lambda t: _sq_mean(T.sigmoid(t)), x)
    xr = Tensor(np.where(np.abs(x.data) < 0.2, 0.5, x.data), requires_grad=True)
    add("relu", lambda t: _sq_mean(T.relu(t)), xr)

    # --- batch norm (train mode exercises the batch-statistics backward)
    xb = _rand(rng, (3, 4, 5, 5))
    gamma = _rand(rng, (4,), 0.5, 1.5)
    beta = _rand(rng, (4,))
    rm, rv = np.zeros(4, dtype=F64), np.ones(4, dtype=F64)

    def bn_loss(_):
        return _sq_mean(T.batch_norm(xb, gamma, beta, rm.copy(), rv.copy(), training=True))

    add("batch_norm wrt x", bn_loss, xb)
    add("batch_norm wrt gamma", bn_loss, gamma)
    add("batch_norm wrt beta", bn_loss, beta)

    # --- Fourier transforms (odd width exercises the exact inverse)
    xf = _rand(rng, (2, 2, 4, 5))

    def fft_loss(_):
        sp = T.fft2(xf)
        return T.mean_all(T.mul(sp.real, sp.real)) + T.mean_all(T.mul(sp.imag, sp.imag))

    add("fft2", fft_loss, xf)
    re = _rand(rng, (2, 2, 4, 4))
    im = _rand(rng, (2, 2, 4, 4))
    add("ifft2 wrt real", lambda _: _sq_mean(T.ifft2(T.ComplexPair(re, im, (4, 6)))), re)
    add("ifft2 wrt imag", lambda _: _sq_mean(T.ifft2(T.ComplexPair(re, im, (4, 6)))), im)

    # --- rearrangement and reductions
    xs = _rand(rng, (2, 8, 3, 3))
    add("pixel_shuffle", lambda t: _sq_mean(T.pixel_shuffle(t, 2)), xs)
    a = _rand(rng, (2, 3, 4, 4))
    bbc = _rand(rng, (2, 3, 1, 1))
    add("mul broadcast", lambda t: _sq_mean(T.mul(a, bbc)), bbc)
    add("add", lambda t: _sq_mean(T.add(a, a)), a)

    def cs_loss(_):
        parts = T.split(a, [1, 2], axis=1)
        return _sq_mean(T.concat(list(parts), axis=1))

    add("concat/split", cs_loss, a)
    add("global_avg_pool", lambda t: _sq_mean(T.global_avg_pool(t)), a)
    sh = Tensor(np.where(np.abs(a.data) < 0.2, 0.4, a.data), requires_grad=True)
    add("abs/mean", lambda t: T.mean_all(T.absolute(t)), sh)

    # --- composed blocks
    brng = np.random.default_rng(11)
    skf = SKFusionBlock(4, brng, dtype=F64)
    f1 = _rand(rng, (2, 4, 4, 4))
    f2 = _rand(rng, (2, 4, 4, 4))
    add("sk_fuse wrt f1", lambda _: _sq_mean(skf(f1, f2)), f1)
    _check_params(reports, "sk_fuse", lambda: _sq_mean(skf(f1, f2)),
                  list(skf.named_params()), None, rng)

    cam = ChannelAttentionBlock(4, brng, dtype=F64)
    xc = _rand(rng, (2, 4, 4, 4))
    add("channel_attention wrt x", lambda _: _sq_mean(cam(xc)[1]), xc)
    _check_params(reports, "channel_attention", lambda: _sq_mean(cam(xc)[1]),
                  list(cam.named_params()), None, rng)

    hafm = HAFMBlock(4, brng, dtype=F64).train()
    xh = _rand(rng, (2, 4, 4, 4))
    xd = _rand(rng, (2, 4, 4, 4))
    hafm_loss = lambda: _sq_mean(hafm(xh, xd)[0])
    add("hafm wrt x_f", lambda _: hafm_loss(), xh)
    add("hafm wrt x_d", lambda _: hafm_loss(), xd)
    _check_params(reports, "hafm", hafm_loss, list(hafm.named_params()), 6, rng)

    mgam = MGAMBlock(4, brng, dtype=F64).train()
    xm = _rand(rng, (2, 4, 6, 6))
    xmd = _rand(rng, (2, 4, 6, 6))

    def mgam_loss():
        f, d = mgam(xm, xmd)
        return _sq_mean(f) + _sq_mean(d)

    add("mgam wrt x_f", lambda _: mgam_loss(), xm)
    add("mgam wrt x_d", lambda _: mgam_loss(), xmd)
    _check_params(reports, "mgam", mgam_loss, list(mgam.named_params()), 6, rng)

    # --- dual-domain loss (exercises the FFT adjoint end to end)
    pred = _rand(rng, (1, 3, 6, 7), 0.0, 1.0)
    target = Tensor(rng.uniform(0, 1, (1, 3, 6, 7)).astype(F64))
    add("dual_domain_loss", lambda t: dual_domain_loss(t, target, 0.1)[0], pred)

    # --- full one-block network
    cfg = ModelConfig(base_channels=8, blocks_per_stage=(1, 1, 1, 1, 1),
                      dark_channel_patch=3)
    net = build(cfg, seed=3, dtype=F64).train()
    hazy = Tensor(rng.uniform(0.05, 0.95, (1, 3, 8, 8)).astype(F64))
    clean = Tensor(rng.uniform(0.05, 0.95, (1, 3, 8, 8)).astype(F64))

    def net_loss():
        out, _, _ = net(hazy)
        return dual_domain_loss(out, clean, 0.1)[0]

    _check_params(reports, "network", net_loss, list(net.named_params()), net_sample, rng)
    if verbose:
        worst = max(reports, key=lambda r: r.max_rel_err)
        print(f"  worst: {worst.name} at {worst.max_rel_err:.3e}")
    return reports
