"""Command-line surface: train, dehaze, eval, synth, spectrum, gradcheck, info."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import metrics, tensor as T
from .checkpoint import load_checkpoint, save_checkpoint
from .configio import load_config
from .imageio import (ImageBuffer, image_to_tensor, load_depth, load_image,
                      save_gray, save_image, tensor_to_image)
from .network import (ModelConfig, REFERENCE_FLOPS, REFERENCE_FLOPS_EXTENT,
                      REFERENCE_PARAMS, build, flop_count, param_count)
from .priors import HazeParams, depth_linear_ramp, depth_radial, synthesize_haze
from .tensor import Tensor
from .training import TrainConfig, train_loop
from .verification import run_gradient_suite

PSNR_LOG_CAP = 100.0


def _pad_to_multiple(arr, multiple=4):
    """Reflect-pad (B, C, H, W) so both spatial extents divide ``multiple``."""
    h, w = arr.shape[2], arr.shape[3]
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph or pw:
        arr = np.pad(arr, ((0, 0), (0, 0), (0, ph), (0, pw)), mode="reflect")
    return arr, (h, w)


def _load_pairs_dir(root):
    root = Path(root)
    hazy_dir, clean_dir = root / "hazy", root / "clean"
    if not hazy_dir.is_dir() or not clean_dir.is_dir():
        raise FileNotFoundError(f"{root} must contain hazy/ and clean/ subdirectories")
    pairs = []
    for hazy_path in sorted(hazy_dir.iterdir()):
        clean_path = clean_dir / hazy_path.name
        if not clean_path.exists():
            raise FileNotFoundError(f"no clean counterpart for {hazy_path.name}")
        pairs.append((load_image(hazy_path).pixels, load_image(clean_path).pixels))
    if not pairs:
        raise FileNotFoundError(f"no image pairs under {root}")
    return pairs


def cmd_train(args):
    model_cfg, train_cfg = load_config(args.config)
    if train_cfg is None:
        raise ValueError("config file lacks a train section or preset")
    if args.seed is not None:
        train_cfg.seed = args.seed
        model_cfg.seed = args.seed
    if args.iterations is not None:
        train_cfg.iterations = args.iterations
    dataset = _load_pairs_dir(args.data)
    net = build(model_cfg)
    report = train_loop(net, dataset, train_cfg, log_path=args.log,
                        progress=args.progress)
    save_checkpoint(net, args.out, training_step=report.steps)
    psnr_s = min(report.final_train_psnr, PSNR_LOG_CAP)
    print(f"trained {report.steps} steps; final train PSNR {psnr_s:.2f} dB; "
          f"checkpoint -> {args.out}")
    return 0


def cmd_dehaze(args):
    net = load_checkpoint(args.ckpt).eval()
    img = load_image(args.input)
    arr = img.pixels.transpose(2, 0, 1)[None].astype(np.float32)
    padded, (h, w) = _pad_to_multiple(arr)
    with T.no_grad():
        out, _, taps = net(Tensor(padded))
    result = out.data[:, :, :h, :w]
    save_image(tensor_to_image(Tensor(result), bit_depth=img.bit_depth), args.out)
    if args.dump_attention:
        dump = Path(args.dump_attention)
        dump.mkdir(parents=True, exist_ok=True)
        for key, m_sa in taps.items():
            gray = m_sa.data[0].mean(axis=0)
            save_gray(gray, dump / f"{key.replace('.', '_')}.png")
    print(f"dehazed {args.input} ({h}x{w}) -> {args.out}")
    return 0


def cmd_eval(args):
    net = load_checkpoint(args.ckpt).eval()
    out_fh = open(args.out, "w") if args.out else sys.stdout
    try:
        for line in Path(args.pairs).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            hazy_path, clean_path = line.split()
            hazy = load_image(hazy_path)
            clean = load_image(clean_path)
            arr = hazy.pixels.transpose(2, 0, 1)[None].astype(np.float32)
            padded, (h, w) = _pad_to_multiple(arr)
            with T.no_grad():
                out, _, _ = net(Tensor(padded))
            pred = tensor_to_image(Tensor(out.data[:, :, :h, :w]))
            record = {
                "image_id": Path(hazy_path).stem,
                "psnr_db": min(metrics.psnr(pred, clean), PSNR_LOG_CAP),
                "ssim": metrics.ssim(pred, clean),
            }
            out_fh.write(json.dumps(record) + "\n")
    finally:
        if args.out:
            out_fh.close()
    return 0


def _parse_airlight(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise ValueError("airlight must be one value or r,g,b")
    return tuple(parts)


def cmd_synth(args):
    clean = load_image(args.clean)
    if args.depth:
        depth = load_depth(args.depth)
    elif args.depth_kind == "radial":
        depth = depth_radial(clean.height, clean.width)
    else:
        depth = depth_linear_ramp(clean.height, clean.width)
    params = HazeParams(atmospheric_light=_parse_airlight(args.airlight),
                        beta=args.beta, depth=depth)
    save_image(synthesize_haze(clean, params), args.out)
    print(f"synthesized haze (beta={args.beta}) -> {args.out}")
    return 0


def cmd_spectrum(args):
    a = load_image(args.a)
    if args.swap:
        b = load_image(args.b)
        out_a, out_b = metrics.swap_components(a, b, args.swap)
        save_image(ImageBuffer(out_a), args.out_a)
        save_image(ImageBuffer(out_b), args.out_b)
        print(f"swapped {args.swap} -> {args.out_a}, {args.out_b}")
    else:
        region = tuple(int(v) for v in args.modify_region.split(","))
        if len(region) != 4:
            raise ValueError("--modify-region expects r0,r1,c0,c1")
        out = metrics.modify_local_amplitude(a, region, args.gain)
        save_image(ImageBuffer(out), args.out_a)
        print(f"amplitude x{args.gain} in {region} -> {args.out_a}")
    return 0


def cmd_gradcheck(args):
    reports = run_gradient_suite(net_sample=args.sample, verbose=args.verbose)
    failures = [r for r in reports if not r.passed]
    worst = max(reports, key=lambda r: r.max_rel_err)
    print(f"gradcheck: {len(reports) - len(failures)}/{len(reports)} checks passed; "
          f"worst {worst.name} rel err {worst.max_rel_err:.3e}")
    for r in failures:
        print(f"  FAIL {r.name}: rel err {r.max_rel_err:.3e} >= {r.tol}")
    return 1 if failures else 0


def cmd_info(args):
    if args.config:
        model_cfg, _ = load_config(args.config)
    else:
        model_cfg = ModelConfig()
    net = build(model_cfg)
    params = param_count(net)
    extent = REFERENCE_FLOPS_EXTENT
    flops = net.flops(extent, extent)
    print(f"parameters: {params:,} ({params / 1e6:.2f}M; reference {REFERENCE_PARAMS / 1e6:.2f}M)")
    print(f"mac estimate @ {extent}x{extent}: {flops / 1e9:.2f}G "
          f"(reference {REFERENCE_FLOPS / 1e9:.2f}G)")
    print(f"config: {model_cfg.to_dict()}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="dgfd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on paired hazy/clean images")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True, help="directory with hazy/ and clean/")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--log", default=None, help="ND-JSON training log path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None,
                   help="override the configured step count (desk-scale runs)")
    p.add_argument("--progress", type=int, default=None, metavar="N",
                   help="print progress every N steps")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("dehaze", help="run inference on one image")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-attention", default=None,
                   help="directory for per-block haze confidence maps")
    p.set_defaults(func=cmd_dehaze)

    p = sub.add_parser("eval", help="PSNR/SSIM over a pair manifest")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--pairs", required=True, help="file with 'hazy clean' per line")
    p.add_argument("--out", default=None, help="ND-JSON output (stdout default)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="synthesize a hazy image from a clean one")
    p.add_argument("--clean", required=True)
    p.add_argument("--depth", default=None, help="single-channel depth image")
    p.add_argument("--depth-kind", choices=("ramp", "radial"), default="ramp")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--airlight", default="0.8", help="single value or r,g,b")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("spectrum", help="frequency-domain degradation experiments")
    p.add_argument("--a", required=True)
    p.add_argument("--b", default=None)
    p.add_argument("--swap", choices=("phase", "imaginary", "amplitude", "real"))
    p.add_argument("--modify-region", default=None, help="r0,r1,c0,c1 half-spectrum box")
    p.add_argument("--gain", type=float, default=0.0)
    p.add_argument("--out-a", required=True)
    p.add_argument("--out-b", default=None)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("gradcheck", help="run the 64-bit gradient suite")
    p.add_argument("--sample", type=int, default=2,
                   help="coordinates per network parameter tensor")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("info", help="parameter count and cost estimate")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "spectrum":
        if bool(args.swap) == bool(args.modify_region):
            parser.error("spectrum needs exactly one of --swap or --modify-region")
        if args.swap and (args.b is None or args.out_b is None):
            parser.error("--swap requires --b and --out-b")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
