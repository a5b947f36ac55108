"""Exporter CLI: train toy reference models, export checkpoints to JSON."""

from __future__ import annotations

import argparse
import sys

from .export import export, save_checkpoint
from .train import train_toy


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="certiprop-exporter")
    sub = p.add_subparsers(dest="command", required=True)

    tp = sub.add_parser("train", help="train a toy reference model")
    tp.add_argument("--dataset", choices=("digits", "synthetic2d"),
                    default="digits")
    tp.add_argument("--arch", choices=("mlp", "cnn"), default="mlp")
    tp.add_argument("--ibp-eps", type=float, default=None,
                    help="certified-training perturbation (omit for standard)")
    tp.add_argument("--seed", type=int, default=0)
    tp.add_argument("--epochs", type=int, default=60)
    tp.add_argument("--out", required=True)

    ep = sub.add_parser("export", help="convert a checkpoint to canonical JSON")
    ep.add_argument("--ckpt", required=True)
    ep.add_argument("--out", required=True)

    args = p.parse_args(argv)
    if args.command == "train":
        ckpt = train_toy(args.dataset, args.arch, args.ibp_eps, args.seed,
                         args.epochs)
        save_checkpoint(ckpt, args.out)
        print(f"train accuracy {ckpt['meta']['train_accuracy']:.4f} -> {args.out}",
              file=sys.stderr)
    else:
        export(args.ckpt, args.out)
        print(f"exported {args.ckpt} -> {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
