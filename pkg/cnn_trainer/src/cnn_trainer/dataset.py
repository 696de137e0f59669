"""Reader for exported photon-count datasets.

A dataset directory contains manifest.json plus one raw little-endian
uint16 image tensor and one uint8 label vector per split, row-major,
samples in trial order.  This module depends only on that documented
layout, not on the code that wrote it.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import Dataset

_REQUIRED = {
    "formatVersion": 1,
    "elementType": "uint16",
    "byteOrder": "little",
    "layout": "row-major",
    "labelType": "uint8",
}


def load_manifest(path) -> tuple[dict, Path]:
    """Read and validate manifest.json; accepts the file or its directory."""
    path = Path(path)
    manifest_path = path / "manifest.json" if path.is_dir() else path
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    for key, expected in _REQUIRED.items():
        got = manifest.get(key)
        if got != expected:
            raise ValueError(f"manifest {key}={got!r}, this reader needs {expected!r}")
    directory = manifest_path.parent
    width, height = int(manifest["imageWidth"]), int(manifest["imageHeight"])
    for split, info in manifest["splits"].items():
        count = int(info["sampleCount"])
        images = directory / info["imagesFile"]
        labels = directory / info["labelsFile"]
        expect_bytes = count * width * height * 2
        if images.stat().st_size != expect_bytes:
            raise ValueError(f"{images.name}: {images.stat().st_size} bytes, "
                             f"expected {expect_bytes}")
        if labels.stat().st_size != count:
            raise ValueError(f"{labels.name}: {labels.stat().st_size} bytes, "
                             f"expected {count}")
    return manifest, directory


class ManifestDataset(Dataset):
    """Torch dataset over one split of an exported photon-count directory.

    Images are served as float32 tensors of shape (1, H, W), scaled by
    1/meanLevel so typical pixel values sit near 1.0; labels are int64
    (0 = noise, 1 = signal).
    """

    def __init__(self, data_dir, split: str = "train"):
        manifest, directory = load_manifest(data_dir)
        if split not in manifest["splits"]:
            raise ValueError(f"split {split!r} not in manifest "
                             f"({sorted(manifest['splits'])})")
        info = manifest["splits"][split]
        count = int(info["sampleCount"])
        height = int(manifest["imageHeight"])
        width = int(manifest["imageWidth"])
        self.manifest = manifest
        self.split = split
        self.mean_level = float(manifest["meanLevel"])
        self.images = np.memmap(directory / info["imagesFile"], dtype="<u2",
                                mode="r", shape=(count, height, width))
        self.labels = np.fromfile(directory / info["labelsFile"], dtype=np.uint8)
        bad = set(np.unique(self.labels)) - {0, 1}
        if bad:
            raise ValueError(f"labels contain values other than 0/1: {sorted(bad)}")

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, index: int):
        image = np.asarray(self.images[index], dtype=np.float32) / self.mean_level
        return torch.from_numpy(image).unsqueeze(0), int(self.labels[index])

    def validate_statistics(self, max_samples: int = 512) -> None:
        """Cross-check pixel means against the manifest's scene statistics.

        The mean count over pixels of an image from a Poisson rate map with
        spatial mean m has expectation m and variance m / nPixels; averaging
        k images shrinks the variance by k.  A byte-order or layout mismatch
        scrambles values wildly, so a 3-sigma band is a sharp test.
        """
        stats = self.manifest["sceneStats"]
        expected = {0: float(stats["noiseMeanLambda"]),
                    1: float(stats["signalMeanLambda"])}
        n_pixels = self.images.shape[1] * self.images.shape[2]
        for label, mean_lambda in expected.items():
            idx = np.nonzero(self.labels == label)[0][:max_samples]
            if idx.size == 0:
                continue
            got = float(np.asarray(self.images[idx], dtype=np.float64).mean())
            sigma = math.sqrt(mean_lambda / (n_pixels * idx.size))
            if abs(got - mean_lambda) > 3.0 * sigma:
                raise ValueError(
                    f"{self.split} class {label}: mean count {got:.3f} vs "
                    f"declared {mean_lambda:.3f} (3 sigma = {3 * sigma:.3f}); "
                    f"byte order or layout mismatch?")


class RelabeledDataset(Dataset):
    """Same images as the base dataset, labels replaced (control runs)."""

    def __init__(self, base: ManifestDataset, labels: np.ndarray):
        if len(labels) != len(base):
            raise ValueError("label vector length does not match the dataset")
        self.base = base
        self.labels = np.asarray(labels)

    def __len__(self) -> int:
        return len(self.base)

    def __getitem__(self, index: int):
        image, _ = self.base[index]
        return image, int(self.labels[index])
