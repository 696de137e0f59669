"""Command-line entry points: train a detector, predict the test split.

Predictions are scored by the benchmark harness's `score` subcommand;
failures exit nonzero with machine-readable error JSON on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .model import ARCHITECTURES
from .train import (CHECKPOINT_NAME, TrainingProtocol, predict_test_split,
                    train)


def _cmd_train(args) -> int:
    protocol = (TrainingProtocol.smoke(init_seed=args.seed) if args.smoke
                else TrainingProtocol(init_seed=args.seed))
    log = train(args.data, args.out, protocol, arch=args.arch,
                randomize_labels=args.randomize_labels)
    print(json.dumps({
        "checkpoint": str(Path(args.out) / CHECKPOINT_NAME),
        "epochs": len(log["epochs"]),
        "initialLoss": log["initialLoss"],
        "finalLoss": log["epochs"][-1]["loss"],
        "finalAccuracy": log["epochs"][-1]["accuracy"],
    }))
    return 0


def _cmd_predict(args) -> int:
    count = predict_test_split(args.checkpoint, args.data, args.out)
    print(json.dumps({"out": args.out, "count": count}))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cnn-trainer",
        description="Train a CNN detector on an exported photon-count "
                    "dataset and write test-split predictions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a dataset directory")
    p.add_argument("--data", required=True, help="dataset directory (manifest.json)")
    p.add_argument("--out", required=True, help="output directory for checkpoint/log")
    p.add_argument("--smoke", action="store_true",
                   help="reduced schedule (3 epochs of 2,000 samples)")
    p.add_argument("--seed", type=int, default=0, help="initialization seed")
    p.add_argument("--arch", choices=ARCHITECTURES, default="resnet18")
    p.add_argument("--randomize-labels", action="store_true",
                   help="shuffle training labels (control run)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="write test-split predictions")
    p.add_argument("--checkpoint", required=True, help="trained checkpoint.pt")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="predictions file to write")
    p.set_defaults(func=_cmd_predict)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # CLI boundary: every failure becomes error JSON
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
