"""Command-line entry point: train / eval / infer / verify / bench / count."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .bench import bench_complexity, curves_csv
from .checkpoint import load_arrays
from .config import ModelConfig, TrainConfig, load_config, save_config
from .geometry import disp_to_depth
from .model import build_model, count_params
from .ppm import read_image, write_depth, write_image
from .profile import count_flops
from .synthetic import make_scene_set, render_scene
from .tensor import Tensor, no_grad
from .trainer import evaluate, train_loop
from .verify import report, run_checks


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return (int(h), int(w))  # stored as (H, W)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}")


def _load_configs(args) -> tuple[ModelConfig, TrainConfig]:
    if getattr(args, "config", None):
        model_cfg, train_cfg = load_config(args.config)
    else:
        model_cfg, train_cfg = ModelConfig(), TrainConfig()
    if getattr(args, "input", None):
        from dataclasses import replace

        model_cfg = replace(model_cfg, input_size=args.input)
    if getattr(args, "scales", None):
        from dataclasses import replace

        model_cfg = replace(model_cfg, scales=args.scales)
    if getattr(args, "ablate", None):
        model_cfg = model_cfg.with_ablation(args.ablate)
    if getattr(args, "seed", None) is not None:
        from dataclasses import replace

        train_cfg = replace(train_cfg, seed=args.seed)
    return model_cfg, train_cfg


def _add_common(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--input", type=_parse_size, default=None, metavar="WxH")
    p.add_argument("--out", default=None, help="output file or directory")
    p.add_argument("--ablate", choices=("sdc", "raka", "dfsp"), default=None)
    p.add_argument("--scales", type=int, default=None)


def cmd_train(args) -> int:
    model_cfg, train_cfg = _load_configs(args)
    out_dir = args.out or "runs"
    os.makedirs(out_dir, exist_ok=True)
    trace = os.path.join(out_dir, "trace.csv")
    ckpt = os.path.join(out_dir, "checkpoint.ldnt")
    save_config(os.path.join(out_dir, "resolved.cfg"), model_cfg, train_cfg)
    result = train_loop(model_cfg, train_cfg, trace_path=trace, checkpoint_path=ckpt)
    print(f"trained {train_cfg.steps} steps: loss {result.initial_loss:.5f} -> "
          f"{result.final_loss:.5f}")
    m = result.metrics
    print(f"abs_rel {m.abs_rel:.4f}  sq_rel {m.sq_rel:.4f}  rmse {m.rmse:.4f}  "
          f"rmse_log {m.rmse_log:.4f}  d1 {m.delta1:.4f} d2 {m.delta2:.4f} d3 {m.delta3:.4f}")
    print(f"trace: {trace}\ncheckpoint: {ckpt}")
    return 0


def cmd_eval(args) -> int:
    model_cfg, train_cfg = _load_configs(args)
    model = build_model(model_cfg, train_cfg.seed)
    if args.checkpoint:
        model.load_state(load_arrays(args.checkpoint))
    scenes = make_scene_set(train_cfg.num_scenes, train_cfg.seed, model_cfg.input_size)
    m, rho = evaluate(model, scenes, train_cfg)
    header = "abs_rel,sq_rel,rmse,rmse_log,delta1,delta2,delta3,spearman"
    row = ",".join(repr(v) for v in (*m.astuple(), rho))
    print(header)
    print(row)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(header + "\n" + row + "\n")
    return 0


def cmd_infer(args) -> int:
    model_cfg, train_cfg = _load_configs(args)
    image = read_image(args.image)
    if image.ndim != 3:
        print("infer expects an RGB (P6) input image", file=sys.stderr)
        return 1
    H, W = image.shape[1:]
    if H % 16 or W % 16:
        print(f"image size {W}x{H} must be divisible by 16", file=sys.stderr)
        return 1
    from dataclasses import replace

    model_cfg = replace(model_cfg, input_size=(H, W))
    model = build_model(model_cfg, train_cfg.seed)
    if args.checkpoint:
        model.load_state(load_arrays(args.checkpoint))
    model.eval()
    with no_grad():
        disp = model.predict_disparity(Tensor(image[None]))[0]
        depth = disp_to_depth(disp, model_cfg.min_depth, model_cfg.max_depth)
    out = args.out or os.path.splitext(args.image)[0] + "_depth.pgm"
    write_depth(out, depth.data[0, 0])
    print(f"depth range [{depth.data.min():.3f}, {depth.data.max():.3f}] m -> {out}")
    return 0


def cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else 0
    checks= run_checks(seed)
    text, csv, ok = report(checks)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv)
    return 0 if ok else 1


def cmd_bench(args) -> int:
    sizes = [4**k for k in range(4, 9)]          # 256 .. 65536 tokens
    attn_sizes = [4**k for k in range(4, 7)] + [2 * 4**6, 4**7]  # cap quadratic cost
    dfsp, attn = bench_complexity(
        sizes, channels=args.channels, repeats=args.repeats,
        attention_sizes=attn_sizes, seed=args.seed or 0,
    )
    print(f"{'label':22s} {'tokens':>8s} {'seconds':>12s} {'op count':>14s}")
    for curve in (dfsp, attn):
        for r in curve.rows():
            print(f"{r['label']:22s} {r['tokens']:8d} {r['seconds']:12.6f} {r['op_count']:14d}")
    print(f"dfsp-global: wall slope {dfsp.wall_slope:.3f}, count slope {dfsp.count_slope:.3f}")
    print(f"attention:   wall slope {attn.wall_slope:.3f}, count slope {attn.count_slope:.3f}")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(curves_csv((dfsp, attn)))
    return 0


def cmd_count(args) -> int:
    model_cfg, train_cfg = _load_configs(args)
    model = build_model(model_cfg, train_cfg.seed)
    rep = count_flops(model, model_cfg.input_size)
    print(rep.as_table())
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(rep.as_csv())
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="litedepth",
        description="Lightweight self-supervised monocular depth estimation "
                    "(from-scratch differentiable engine).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the toy training loop")
    _add_common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="depth metrics for a checkpoint on synthetic scenes")
    _add_common(p)
    p.add_argument("--checkpoint", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("infer", help="depth map for one PPM image")
    _add_common(p)
    p.add_argument("--image", required=True)
    p.add_argument("--checkpoint", default=None)
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("verify", help="run the full property suite")
    _add_common(p)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("bench", help="complexity benchmark vs attention")
    _add_common(p)
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("count", help="parameter and FLOP accounting")
    _add_common(p)
    p.set_defaults(fn=cmd_count)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
