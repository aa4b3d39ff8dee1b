"""Command line entry point.

Verbs: train (one arm), compare (two-arm experiment + figures), gradcheck
(finite-difference verification), transform (gradient image of a PGM),
info (layer table and parameter counts).

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 divergence or
failed check.
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import models, train
from .errors import (DataError, DivergenceError, GradientCheckError,
                     ParameterError, UsageError)
from .gradcheck import gradcheck_suite
from .gradinput import gradient_transform
from .pgm import read_pgm, write_pgm

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CHECK = 3

DATASET_CHOICES = ("mnist", "cifar10", "cifar100", "toy")
ARCH_CHOICES = ("baseline", "dualpath")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_train_flags(p):
    p.add_argument("--dataset", choices=DATASET_CHOICES, default="mnist",
                   help="dataset kind (default: mnist; toy is synthetic 28x28)")
    p.add_argument("--epochs", type=int, default=5, help="training epochs (default: 5)")
    p.add_argument("--batch-size", type=int, default=64,
                   help="minibatch size (default: 64)")
    p.add_argument("--lr", type=float, default=0.01,
                   help="SGD learning rate (default: 0.01)")
    p.add_argument("--momentum", type=float, default=0.9,
                   help="SGD momentum (default: 0.9)")
    p.add_argument("--seed", type=int, default=1,
                   help="seed for init, shuffling and dropout (default: 1)")
    p.add_argument("--subset", type=int, default=None,
                   help="cap the training set to its first N samples (default: all)")
    p.add_argument("--data-dir", default=None,
                   help=f"dataset root (default: ${data_mod.DATA_DIR_ENV} or ./data)")


def build_parser():
    parser = _Parser(prog="gradpath",
                     description="Dual-input image-gradient CNN experiment harness")
    sub = parser.add_subparsers(dest="verb", metavar="verb")

    p = sub.add_parser("train", help="train a single architecture arm")
    _add_train_flags(p)
    p.add_argument("--arch", choices=ARCH_CHOICES, default="baseline",
                   help="architecture arm (default: baseline)")
    p.add_argument("--out", default=None, help="optional metrics CSV path")
    p.add_argument("--no-timing", action="store_true",
                   help="write 0 in the wall_time_s column (reproducible output)")

    p = sub.add_parser("compare", help="run baseline and dualpath arms, emit CSV + figures")
    _add_train_flags(p)
    p.add_argument("--out", default="comparison.csv",
                   help="metrics CSV path (default: comparison.csv)")
    p.add_argument("--no-figures", action="store_true",
                   help="skip rendering the matplotlib figures next to the CSV")
    p.add_argument("--fig-dir", default=None,
                   help="directory for figures (default: alongside the CSV)")
    p.add_argument("--no-timing", action="store_true",
                   help="write 0 in the wall_time_s column (reproducible output)")

    p = sub.add_parser("gradcheck", help="finite-difference checks, 64-bit mode")
    p.add_argument("--seed", type=int, default=0, help="check seed (default: 0)")

    p = sub.add_parser("transform", help="gradient-transform a binary PGM image")
    p.add_argument("--in", dest="in_path", required=True, help="input PGM (P5)")
    p.add_argument("--out", dest="out_path", required=True, help="output PGM (P5)")

    p = sub.add_parser("info", help="print the layer table and parameter count")
    p.add_argument("--dataset", choices=DATASET_CHOICES, default="mnist",
                   help="dataset kind (default: mnist)")
    p.add_argument("--arch", choices=ARCH_CHOICES, default="baseline",
                   help="architecture (default: baseline)")

    return parser


def _config(args, topology="single"):
    return train.TrainConfig(dataset_kind=args.dataset, topology=topology,
                             epochs=args.epochs, batch_size=args.batch_size,
                             learning_rate=args.lr, momentum=args.momentum,
                             seed=args.seed, subset_size=args.subset)


def _load_split(args, split):
    return data_mod.load_dataset(args.dataset, split, args.data_dir)


def _cmd_train(args):
    config = _config(args, train.ARCH_TOPOLOGY[args.arch])
    train_set = _load_split(args, "train")
    test_set = _load_split(args, "test")
    rows, _ = train.train_arm(config, args.arch, train_set, test_set,
                              timing=not args.no_timing, log=print)
    if args.out:
        train.write_metrics_csv(rows, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_compare(args):
    config = _config(args)
    train_set = _load_split(args, "train")
    test_set = _load_split(args, "test")
    rows = train.run_experiment(config, train_set, test_set, out_path=args.out,
                                timing=not args.no_timing, log=print)
    delta = train.accuracy_delta(rows)
    print(f"wrote {args.out}")
    print(f"final test accuracy delta (dualpath - baseline): {delta:+.4f}")
    if not args.no_figures:
        from .plots import render_comparison_figures  # matplotlib import is lazy
        out = Path(args.out)
        figs = render_comparison_figures(rows, args.fig_dir or out.parent, out.stem)
        for f in figs:
            print(f"wrote {f}")
    return EXIT_OK


def _cmd_gradcheck(args):
    report = gradcheck_suite(seed=args.seed)
    for line in report.lines():
        print(line)
    if not report.ok:
        failed = ", ".join(r.name for r in report.failures())
        raise GradientCheckError(f"gradient checks failed: {failed}")
    return EXIT_OK


def _cmd_transform(args):
    image = read_pgm(args.in_path)
    batch = image[None, None].astype(np.float32) / 255.0
    grad = gradient_transform(batch)[0, 0]
    lo, hi = float(grad.min()), float(grad.max())
    if hi > lo:
        scaled = np.rint((grad - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(grad)
    write_pgm(args.out_path, scaled.astype(np.uint8))
    sidecar = args.out_path + ".bounds.txt"
    with open(sidecar, "w") as f:
        f.write(f"gradient range [{lo:.6g}, {hi:.6g}] mapped linearly to [0, 255]\n")
    print(f"wrote {args.out_path} (+ {sidecar})")
    return EXIT_OK


def _cmd_info(args):
    kind = "mnist" if args.dataset == "toy" else args.dataset
    topology = train.ARCH_TOPOLOGY[args.arch]
    net = models.build(kind, topology, seed=0)
    c, h, w = models.input_shape(kind)
    print(f"dataset {args.dataset} ({c}x{h}x{w}), arch {args.arch}")
    if topology == "dual":
        print("input: original image and its gradient form (dx+dy), shared trunk,")
        print("branches summed after flatten (ADD), dense head on the sum")
    for section, stack in (("trunk", net.trunk), ("head", net.head)):
        for i, layer in enumerate(stack):
            shapes = ", ".join(f"{n}{list(p.shape)}" for n, p in layer.params.items())
            print(f"  {section}.{i:<2d} {layer.kind:<12} {shapes}"
                  f"{'  params=' + str(layer.param_count()) if layer.params else ''}")
    total = models.param_count(net)
    print(f"trainable parameters: {total}")
    if topology == "dual":
        base = models.param_count(models.build(kind, "single", seed=0))
        print(f"baseline parameters:  {base} ({'equal' if base == total else 'DIFFER'})")
    return EXIT_OK


_HANDLERS = {"train": _cmd_train, "compare": _cmd_compare, "gradcheck": _cmd_gradcheck,
             "transform": _cmd_transform, "info": _cmd_info}


def dispatch(argv):
    """Parse argv and run the requested command; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.verb is None:
            raise UsageError("gradpath: a verb is required (see --help)")
        return _HANDLERS[args.verb](args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except ParameterError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:  # includes FormatError
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (DivergenceError, GradientCheckError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CHECK


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
