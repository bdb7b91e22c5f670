"""Dual-domain L1 loss, Adam, cosine LR schedule, paired augmentation, and the
deterministic training loop."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import tensor as T
from .network import DGFDNet
from .tensor import ConfigError, DimensionError, Tensor


class TrainingDiverged(RuntimeError):
    pass


# published per-dataset training configurations
PRESETS = {
    "its": dict(init_lr=3e-4, batch_size=8, patch_size=256, epochs=1000),
    "ots": dict(init_lr=1e-4, batch_size=8, patch_size=256, epochs=60),
    "dense": dict(init_lr=2e-4, batch_size=2, patch_size=512, epochs=5000),
    "nh": dict(init_lr=3e-4, batch_size=4, patch_size=384, epochs=6000),
}


@dataclass
class TrainConfig:
    init_lr: float = 3e-4
    final_lr: float = 1e-6
    batch_size: int = 8
    patch_size: int = 256
    epochs: int | None = None
    iterations: int | None = None
    freq_weight: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    random_crop: bool = True
    hflip: bool = True
    vflip: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.freq_weight < 0:
            raise ConfigError("frequency loss weight must be >= 0")
        if not self.init_lr > self.final_lr > 0:
            raise ConfigError("need init_lr > final_lr > 0")
        if self.epochs is None and self.iterations is None:
            raise ConfigError("set either epochs or iterations")

    def total_steps(self, num_pairs: int) -> int:
        if self.iterations is not None:
            return self.iterations
        per_epoch = max(1, math.ceil(num_pairs / self.batch_size))
        return self.epochs * per_epoch

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @staticmethod
    def from_dict(d, preset=None):
        known = {f.name for f in fields(TrainConfig)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        merged = dict(PRESETS[preset]) if preset else {}
        merged.update(d)
        return TrainConfig(**merged)


# ---------------------------------------------------------------------------
# loss


def dual_domain_loss(pred: Tensor, target: Tensor, freq_weight: float = 0.1):
    """Mean L1 in pixel space plus ``freq_weight`` times mean L1 over the
    half-spectrum real/imag differences. Returns (loss, spatial, frequency)."""
    if pred.shape != target.shape:
        raise DimensionError(f"loss shapes differ: {pred.shape} vs {target.shape}")
    spatial = T.mean_all(T.absolute(pred - target))
    pf = T.fft2(pred)
    tf = T.fft2(target)
    freq = T.scale(
        T.mean_all(T.absolute(pf.real - tf.real)) + T.mean_all(T.absolute(pf.imag - tf.imag)),
        0.5,
    )
    return spatial + T.scale(freq, freq_weight), spatial, freq


# ---------------------------------------------------------------------------
# optimizer and schedule


class Adam:
    """Bias-corrected Adam over a fixed parameter list; updates in place."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, lr):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue  # disconnected parameter: zero gradient, no update
            g = p.grad
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            p.data -= (lr * update).astype(p.data.dtype)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def adam_step(params, state: Adam | None, lr, **kwargs) -> Adam:
    """Functional wrapper: creates state on first use, then applies one update."""
    if state is None:
        state = Adam(params, **kwargs)
    state.step(lr)
    return state


def cosine_lr(step: int, total_steps: int, init_lr: float, final_lr: float) -> float:
    if not 0 <= step <= total_steps:
        raise ConfigError(f"step {step} outside [0, {total_steps}]")
    return final_lr + (init_lr - final_lr) * (1.0 + math.cos(math.pi * step / total_steps)) / 2.0


# ---------------------------------------------------------------------------
# augmentation


def augment(pair, rng, patch_size=None, hflip=True, vflip=True):
    """Identical random crop/flips on a (hazy, clean) pair of HxWx3 arrays."""
    hazy, clean = (np.asarray(a) for a in pair)
    if hazy.shape != clean.shape:
        raise DimensionError("augment expects an aligned pair")
    h, w = hazy.shape[:2]
    if patch_size is not None:
        if h < patch_size or w < patch_size:
            raise DimensionError(f"image {(h, w)} smaller than patch {patch_size}")
        top = int(rng.integers(0, h - patch_size + 1))
        left = int(rng.integers(0, w - patch_size + 1))
        hazy = hazy[top : top + patch_size, left : left + patch_size]
        clean = clean[top : top + patch_size, left : left + patch_size]
    if hflip and rng.random() < 0.5:
        hazy, clean = hazy[:, ::-1], clean[:, ::-1]
    if vflip and rng.random() < 0.5:
        hazy, clean = hazy[::-1], clean[::-1]
    return hazy.copy(), clean.copy()


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainReport:
    steps: int
    loss_curve: list = field(default_factory=list)
    spatial_curve: list = field(default_factory=list)
    freq_curve: list = field(default_factory=list)
    final_train_psnr: float = float("nan")


def _psnr_db(a, b):
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return float("inf")
    return 10.0 * math.log10(1.0 / mse)


def evaluate_train_psnr(net: DGFDNet, pairs) -> float:
    """Mean PSNR of the (clamped) network output over the given pairs, eval mode."""
    was_training = net.training
    net.eval()
    scores = []
    with T.no_grad():
        for hazy, clean in pairs:
            x = Tensor(hazy.transpose(2, 0, 1)[None].astype(np.float32))
            out, _, _ = net(x)
            pred = np.clip(out.data[0].transpose(1, 2, 0), 0.0, 1.0)
            scores.append(min(_psnr_db(pred, clean), 100.0))
    if was_training:
        net.train()
    return float(np.mean(scores))


def train_loop(net: DGFDNet, dataset, config: TrainConfig, log_path=None,
               progress=None) -> TrainReport:
    """Train on (hazy, clean) pairs of HxWx3 float arrays in [0, 1].

    Deterministic under ``config.seed``. Writes one JSON record per step to
    ``log_path`` when given; aborts with a diagnostic if the loss goes
    non-finite.
    """
    if not dataset:
        raise ConfigError("training needs a non-empty dataset")
    rng = np.random.default_rng(config.seed)
    total = config.total_steps(len(dataset))
    opt = Adam(net.params(), beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    report = TrainReport(steps=total)
    log = open(log_path, "w") if log_path else None
    net.train()
    try:
        for step in range(total):
            lr = cosine_lr(step, total, config.init_lr, config.final_lr)
            n = min(config.batch_size, len(dataset))
            idx = rng.choice(len(dataset), size=n, replace=False)
            hazy_batch, clean_batch = [], []
            for i in idx:
                hazy, clean = dataset[i]
                patch = config.patch_size if config.random_crop else None
                if patch is not None and patch < min(hazy.shape[:2]):
                    hazy, clean = augment((hazy, clean), rng, patch,
                                          config.hflip, config.vflip)
                elif config.hflip or config.vflip:
                    hazy, clean = augment((hazy, clean), rng, None,
                                          config.hflip, config.vflip)
                hazy_batch.append(hazy.transpose(2, 0, 1))
                clean_batch.append(clean.transpose(2, 0, 1))
            hazy_t = Tensor(np.stack(hazy_batch).astype(np.float32))
            clean_t = Tensor(np.stack(clean_batch).astype(np.float32))

            out, _, _ = net(hazy_t)
            loss, spatial, freq = dual_domain_loss(out, clean_t, config.freq_weight)
            loss_val = float(loss.data)
            if not math.isfinite(loss_val):
                raise TrainingDiverged(
                    f"non-finite loss {loss_val} at step {step} (lr={lr:.3e})"
                )
            opt.zero_grad()
            loss.backward()
            opt.step(lr)

            report.loss_curve.append(loss_val)
            report.spatial_curve.append(float(spatial.data))
            report.freq_curve.append(float(freq.data))
            if log:
                log.write(json.dumps({
                    "step": step, "lr": lr, "loss": loss_val,
                    "spatial_loss": float(spatial.data), "freq_loss": float(freq.data),
                }) + "\n")
            if progress and (step + 1) % progress == 0:
                print(f"step {step + 1}/{total} lr {lr:.3e} loss {loss_val:.5f}")
    finally:
        if log:
            log.close()
    report.final_train_psnr = evaluate_train_psnr(net, dataset)
    return report
