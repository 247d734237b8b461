"""``stftvae`` command line: train, eval, compare, generate, blur-demo.

Errors print ``error[<category>]: <message>`` on stderr and exit with the
category's exit code.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments as E
from .errors import StftVaeError


def _common(p):
    p.add_argument("--config", help="flat key = value file of RunConfig fields")
    p.add_argument("--preset", choices=sorted(E.PRESETS))
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--epochs", type=int)
    p.add_argument("--subset", type=int, help="train on the first n images")
    p.add_argument("--eval-subset", type=int, help="evaluate on the first n test images")
    p.add_argument("--data-source", choices=["idx", "sample"])
    p.add_argument("--data-dir")
    p.add_argument("--dtype", choices=["float32", "float64"])


def build_parser():
    parser = argparse.ArgumentParser(prog="stftvae", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one preset and write checkpoint, log and config")
    _common(p)

    p = sub.add_parser("eval", help="PSNR/SSIM of a checkpoint on the test split")
    _common(p)
    p.add_argument("--checkpoint", help="defaults to the run directory's checkpoint.npz")
    p.add_argument("--output", help="metrics CSV path (default <run dir>/metrics.csv)")

    p = sub.add_parser("compare", help="table.csv and sample grids for finished runs")
    _common(p)
    p.add_argument("--presets", nargs="+", default=list(E.PRESETS), metavar="PRESET")
    p.add_argument("--seeds", nargs="+", type=int, metavar="SEED")
    p.add_argument("--train", action="store_true", help="train every (preset, seed) pair first")

    p = sub.add_parser("generate", help="PNG grid of samples decoded from the prior")
    _common(p)
    p.add_argument("--checkpoint")
    p.add_argument("-n", type=int, default=16)
    p.add_argument("--cols", type=int, default=4)
    p.add_argument("--output", help="PNG path (default <run dir>/samples.png)")

    p = sub.add_parser("blur-demo", help="local-phase blur demonstration on one image")
    _common(p)
    p.add_argument("image", help="input image (any format Pillow reads)")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--band-split", type=float, help="wrapped-radius threshold (default H/4)")
    return parser


def run_config(args):
    overrides = {
        k: getattr(args, k)
        for k in ("preset", "seed", "out_dir", "epochs", "subset", "eval_subset", "data_source", "data_dir", "dtype")
    }
    if args.config:
        return E.load_config(args.config, **overrides)
    return E.RunConfig().replace(**overrides)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        run = run_config(args)
        if args.command == "train":
            res = E.train(run)
            print(f"wrote {res.run_dir}")
        elif args.command == "eval":
            ckpt = args.checkpoint or run.run_dir() / "checkpoint.npz"
            report = E.cmd_eval(ckpt, run)
            out = Path(args.output) if args.output else run.run_dir() / "metrics.csv"
            E.write_metrics_csv(out, [report])
            print(f"{report.loss_name} seed {report.seed}: PSNR {report.psnr:.3f} dB, SSIM {report.ssim:.4f} (n={report.n})")
        elif args.command == "compare":
            seeds = args.seeds or [run.seed]
            if args.train:
                E.run_table(run, args.presets, seeds)
            reports = E.cmd_compare(run, args.presets, seeds)
            for name, (p, s) in E.mean_by_preset(reports).items():
                print(f"{name:10s} PSNR {p:.3f}  SSIM {s:.4f}")
            print(f"wrote {Path(run.out_dir) / 'table.csv'}")
        elif args.command == "generate":
            ckpt = args.checkpoint or run.run_dir() / "checkpoint.npz"
            out = Path(args.output) if args.output else run.run_dir() / "samples.png"
            E.cmd_generate(ckpt, args.n, run.seed, out, args.cols)
            print(f"wrote {out}")
        elif args.command == "blur-demo":
            demo = E.cmd_blur_demo(args.image, run.out_dir, args.sigma, args.band_split, run.loss_config())
            for name, terms in demo.report.items():
                print(f"{name:16s} phase {terms['phase_term']:.4f}  amplitude {terms['amplitude_term']:.4f}")
    except StftVaeError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
