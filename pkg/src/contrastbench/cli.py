"""Command-line entry points.

Subcommands: sweep, multiloc, export-dataset, score, pattern.  Configs are
JSON files (schema documented in the README).  Failures exit nonzero and
print a machine-readable {"error", "type"} object to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .harness import (ExperimentConfig, MultiLocationRun, build_pattern,
                      export_dataset, run_multi_location, run_sweep,
                      score_predictions)
from .optics import CameraConfig
from .patterns import write_pgm


def _load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _cmd_sweep(args) -> int:
    data = _load_json(args.config)
    data.pop("multiLocation", None)
    if args.workers is not None:
        data["workers"] = args.workers
    config = ExperimentConfig.from_dict(data)
    result = run_sweep(config, out_dir=args.out)
    print(json.dumps({k: v["sensitivityMean"]
                      for k, v in result.summary["detectors"].items()}))
    return 0


def _cmd_multiloc(args) -> int:
    data = _load_json(args.config)
    run = MultiLocationRun.from_dict(data.pop("multiLocation"))
    if args.workers is not None:
        data["workers"] = args.workers
    config = ExperimentConfig.from_dict(data)
    result = run_multi_location(config, run, out_dir=args.out)
    print(json.dumps({det: [{"locationCount": e["locationCount"],
                             "sensitivityMean": e["sensitivityMean"]}
                            for e in entries]
                      for det, entries in result.summary["detectors"].items()}))
    return 0


def _cmd_export_dataset(args) -> int:
    data = _load_json(args.config)
    known = {"stimulus", "camera", "contrast", "trainCount", "testCount", "baseSeed"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown export config keys: {sorted(unknown)}")
    camera = CameraConfig.from_dict(data.get("camera", {}))
    manifest = export_dataset(
        stimulus=data["stimulus"], camera=camera, contrast=float(data["contrast"]),
        train_count=int(data["trainCount"]), test_count=int(data["testCount"]),
        base_seed=int(data.get("baseSeed", 0)), out_dir=args.out)
    print(json.dumps({"manifest": str(Path(args.out) / "manifest.json"),
                      "trainCount": manifest["splits"]["train"]["sampleCount"],
                      "testCount": manifest["splits"]["test"]["sampleCount"]}))
    return 0


def _cmd_score(args) -> int:
    counts, dprime = score_predictions(args.manifest, args.predictions)
    print(json.dumps({
        "dprime": dprime,
        "hits": counts.hits,
        "misses": counts.misses,
        "falseAlarms": counts.false_alarms,
        "correctRejections": counts.correct_rejections,
    }))
    return 0


def _cmd_pattern(args) -> int:
    spec = _load_json(args.spec)
    camera = CameraConfig.from_dict(spec.pop("camera", {}))
    pattern = build_pattern(spec, camera)
    write_pgm(args.out, pattern.values)
    print(json.dumps({"out": args.out, "width": pattern.width,
                      "height": pattern.height,
                      "normalization": pattern.normalization}))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contrastbench",
        description="Photon-noise detection benchmark: ideal observer, linear "
                    "SVM, and dataset export for external classifiers.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run a contrast sweep experiment")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", required=True, help="result directory")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel cell workers (overrides config)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("multiloc", help="run a multi-location experiment")
    p.add_argument("--config", required=True,
                   help="experiment config JSON with a multiLocation section")
    p.add_argument("--out", required=True, help="result directory")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_multiloc)

    p = sub.add_parser("export-dataset", help="write a dataset for external training")
    p.add_argument("--config", required=True, help="export config JSON")
    p.add_argument("--out", required=True, help="dataset directory")
    p.set_defaults(func=_cmd_export_dataset)

    p = sub.add_parser("score", help="score a predictions file against a dataset")
    p.add_argument("--manifest", required=True,
                   help="dataset manifest.json (or its directory)")
    p.add_argument("--predictions", required=True,
                   help="one ASCII 0/1 label per line, test-split order")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("pattern", help="render a stimulus pattern to a PGM file")
    p.add_argument("--spec", required=True,
                   help="stimulus spec JSON (optionally with a camera section)")
    p.add_argument("--out", required=True, help="output PGM path")
    p.set_defaults(func=_cmd_pattern)
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
