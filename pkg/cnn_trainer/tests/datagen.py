"""Hand-written dataset directories for reader/trainer tests.

Builds the documented layout (manifest.json + raw uint16/uint8 tensors)
directly so the tests exercise the format contract, not the exporter.
"""

import json

import numpy as np

MEAN_LEVEL = 50.0
SIGNAL_BOOST = 20.0  # extra counts/pixel in the left half on signal trials


def rate_map(label, width, height):
    lam = np.full((height, width), MEAN_LEVEL)
    if label == 1:
        lam[:, : width // 2] += SIGNAL_BOOST
    return lam


def write_dataset(directory, train=16, test=12, width=8, height=8, seed=0,
                  byte_order="<"):
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    splits = {}
    for split, count in (("train", train), ("test", test)):
        labels = np.tile([0, 1], count // 2).astype(np.uint8)
        images = np.stack([rng.poisson(rate_map(lbl, width, height))
                           for lbl in labels])
        (directory / f"{split}_images.bin").write_bytes(
            images.astype(f"{byte_order}u2").tobytes())
        (directory / f"{split}_labels.bin").write_bytes(labels.tobytes())
        splits[split] = {
            "sampleCount": count,
            "imagesFile": f"{split}_images.bin",
            "labelsFile": f"{split}_labels.bin",
            "trialIdStart": 0 if split == "train" else train,
            "imageBytes": count * width * height * 2,
        }
    signal = rate_map(1, width, height)
    manifest = {
        "formatVersion": 1,
        "version": "test",
        "stimulus": {"kind": "synthetic-step"},
        "contrast": SIGNAL_BOOST / MEAN_LEVEL,
        "meanLevel": MEAN_LEVEL,
        "classes": {"0": "noise", "1": "signal"},
        "imageWidth": width,
        "imageHeight": height,
        "elementType": "uint16",
        "byteOrder": "little",
        "layout": "row-major",
        "labelType": "uint8",
        "seeds": {"baseSeed": seed},
        "splits": splits,
        "sceneStats": {
            "noiseMeanLambda": MEAN_LEVEL,
            "signalMeanLambda": float(signal.mean()),
            "signalLambdaStd": float(signal.std()),
            "clippedFraction": 0.0,
        },
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest
