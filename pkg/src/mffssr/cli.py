"""Command-line entry point: ``mffssr {train,eval,infer,summarize,ablate,plot}``.

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import torch

from .archive import load_weights
from .config import ABLATIONS, ablation_config, load_config
from .cost import cost_report
from .data import AugmentFlags, StereoPatchDataset, load_image, save_image, scan_dataset
from .errors import ConfigError, DataError, NumericError, UsageError
from .metrics import evaluate_dataset
from .model import build_model
from .plotting import plot_crops, plot_loss
from .train import train_loop

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _overrides(pairs) -> dict[str, str]:
    out = {}
    for item in pairs or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects section.key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _run_config(args, extra: dict[str, str] | None = None):
    ov = _overrides(getattr(args, "set", None))
    if getattr(args, "scale", None) is not None:
        ov.setdefault("model.scale", str(args.scale))
    ov.update(extra or {})
    return load_config(getattr(args, "config", None), ov)


def _model_for(args, cfg):
    if getattr(args, "weights", None):
        if not Path(args.weights).is_file():
            raise DataError(f"weights file not found: {args.weights}")
        return load_weights(args.weights)
    print("warning: no --weights given, using freshly initialised weights", file=sys.stderr)
    return build_model(cfg.model, seed=cfg.train.seed)


def cmd_train(args) -> int:
    extra = {}
    if args.iters is not None:
        extra["train.total_iters"] = str(args.iters)
    if args.data is not None:
        extra["data.root"] = args.data
    cfg = _run_config(args, extra)
    d = cfg.data
    manifest = scan_dataset(d.root, d.split, cfg.model.scale, (d.patch_h, d.patch_w))
    flags = AugmentFlags(d.hflip, d.vflip, d.rot180, d.rot90, d.channel_shuffle)
    dataset = StereoPatchDataset(manifest, flags)
    every = max(1, cfg.train.total_iters // 20)

    def progress(it, loss, lr):
        if it % every == 0:
            print(f"iter {it}  loss {loss:.6g}  lr {lr:.3g}", flush=True)

    res = train_loop(cfg.model, cfg.train, dataset, cfg.loss, out_dir=args.out, resume_from=args.resume,
                     progress=progress)
    print(f"checkpoint: {res.checkpoint}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _run_config(args)
    model = _model_for(args, cfg).eval()
    scale = model.cfg.scale
    manifest = scan_dataset(args.data or cfg.data.root, args.split or cfg.data.eval_split, scale)
    dtype = next(model.parameters()).dtype

    def run(lr_l, lr_r):
        with torch.no_grad():
            out = model(torch.as_tensor(lr_l, dtype=dtype)[None], torch.as_tensor(lr_r, dtype=dtype)[None])
        return out.left.clamp(0, 1), out.right.clamp(0, 1)

    report = evaluate_dataset(run, StereoPatchDataset(manifest).eval_pairs(), border=cfg.data.border_crop)
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(f"Left: PSNR {report.psnr_left:.4f} dB  SSIM {report.ssim_left:.4f}")
    print(f"(Left+Right)/2: PSNR {report.psnr_avg:.4f} dB  SSIM {report.ssim_avg:.4f}")
    return EXIT_OK


def cmd_infer(args) -> int:
    for p in (args.left, args.right):
        if not Path(p).is_file():
            raise DataError(f"input image not found: {p}")
    cfg = _run_config(args)
    model = _model_for(args, cfg).eval()
    dtype = next(model.parameters()).dtype
    left = torch.from_numpy(load_image(args.left)).to(dtype)[None]
    right = torch.from_numpy(load_image(args.right)).to(dtype)[None]
    with torch.no_grad():
        sr = model(left, right)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    s = model.cfg.scale
    paths = [out / f"{Path(args.left).stem}_x{s}.png", out / f"{Path(args.right).stem}_x{s}.png"]
    if paths[0] == paths[1]:
        paths = [out / f"left_x{s}.png", out / f"right_x{s}.png"]
    save_image(paths[0], sr.left)
    save_image(paths[1], sr.right)
    for p in paths:
        print(p)
    return EXIT_OK


def _summary(model_cfg, input_hw, fused) -> str:
    return cost_report(model_cfg, tuple(input_hw), fused=fused).to_text(model_cfg)


def cmd_summarize(args) -> int:
    cfg = _run_config(args)
    sys.stdout.write(_summary(cfg.model, args.input_size, args.fused))
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _run_config(args)
    names = sorted(ABLATIONS) if args.name == "all" else [args.name]
    for name in names:
        mcfg = ablation_config(name, cfg.model)
        sys.stdout.write(f"[{name}]\n")
        for k, v in dataclasses.asdict(mcfg).items():
            sys.stdout.write(f"{k} = {str(v).lower() if isinstance(v, bool) else v}\n")
        if args.summarize:
            sys.stdout.write(_summary(mcfg, args.input_size, False))
        sys.stdout.write("\n")
    return EXIT_OK


def cmd_plot(args) -> int:
    if args.log:
        if not Path(args.log).is_file():
            raise DataError(f"log file not found: {args.log}")
        print(plot_loss(args.log, args.out, smooth=args.smooth))
        return EXIT_OK
    if args.lr and args.sr and args.hr:
        for p in (args.lr, args.sr, args.hr):
            if not Path(p).is_file():
                raise DataError(f"image not found: {p}")
        box = tuple(args.box) if args.box else None
        print(plot_crops(load_image(args.lr), load_image(args.sr), load_image(args.hr), args.out, box=box))
        return EXIT_OK
    raise UsageError("plot needs either --log, or all of --lr/--sr/--hr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mffssr", description="Lightweight stereo image super-resolution.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scale=True):
        p.add_argument("--config", help="key = value config file with [model] [train] [data] [loss] sections")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config value")
        if scale:
            p.add_argument("--scale", type=int, choices=(2, 4), help="upscaling factor (selects default N and C)")

    p = sub.add_parser("train", help="train a model")
    common(p)
    p.add_argument("--out", required=True, help="output directory for log and checkpoints")
    p.add_argument("--data", help="dataset root (overrides data.root)")
    p.add_argument("--iters", type=int, help="total iterations (overrides train.total_iters)")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="PSNR/SSIM on a stereo test split")
    common(p)
    p.add_argument("--weights", required=True)
    p.add_argument("--data", help="dataset root")
    p.add_argument("--split", help="split directory name")
    p.add_argument("--out", help="write the metric report (JSON) here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="super-resolve one stereo pair")
    common(p)
    p.add_argument("--weights")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("summarize", help="parameter and MAC counts")
    common(p)
    p.add_argument("--input-size", type=int, nargs=2, default=(128, 128), metavar=("H", "W"))
    p.add_argument("--fused", action="store_true", help="count RepConv in its fused deploy form")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("ablate", help="show ablation presets")
    common(p)
    p.add_argument("--name", required=True, help="preset name or 'all'")
    p.add_argument("--summarize", action="store_true", help="also print the cost report")
    p.add_argument("--input-size", type=int, nargs=2, default=(128, 128), metavar=("H", "W"))
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("plot", help="loss curves or LR/SR/HR comparisons")
    p.add_argument("--log", help="training log to plot")
    p.add_argument("--smooth", type=int, default=100)
    p.add_argument("--lr")
    p.add_argument("--sr")
    p.add_argument("--hr")
    p.add_argument("--box", type=int, nargs=4, metavar=("TOP", "LEFT", "H", "W"))
    p.add_argument("--out", required=True, help="output image file (.png or .svg)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
