"""Poisson photon-count sampling with order-independent, parallel-safe seeding.

Each trial draws from a fresh counter-based stream keyed by
(streamSeed, trialId), so trial k's image never depends on how many trials
were drawn before it or on which worker drew it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .optics import Scene
from .streams import stream

_SAMPLE_TAG = "sensor-sample"


@dataclass(frozen=True)
class SensorSample:
    """Integer photon counts for one captured trial."""

    width: int
    height: int
    counts: np.ndarray
    trial_id: int
    stream_seed: int

    def __post_init__(self):
        if self.counts.shape != (self.height, self.width):
            raise ValueError(f"counts shape {self.counts.shape} != ({self.height}, {self.width})")
        if not np.issubdtype(self.counts.dtype, np.integer):
            raise ValueError(f"counts must be integers, got dtype {self.counts.dtype}")
        if int(self.counts.min()) < 0:
            raise ValueError("counts must be non-negative")


def sample(scene: Scene, stream_seed: int, trial_id: int) -> SensorSample:
    """Draw one Poisson image; bit-identical for identical arguments."""
    rng = stream(stream_seed, _SAMPLE_TAG, trial_id)
    counts = rng.poisson(scene.lam)
    return SensorSample(scene.width, scene.height, counts, trial_id, stream_seed)


def sample_batch(scene: Scene, stream_seed: int, trial_ids: Sequence[int] | Iterable[int]) -> np.ndarray:
    """Stack sample() draws for many trials as a (trials, pixels) matrix.

    Row i equals sample(scene, stream_seed, trial_ids[i]).counts.ravel()
    exactly; batching is a convenience, not a different stream layout.
    """
    lam = scene.lam.ravel()
    ids = list(trial_ids)
    counts = np.empty((len(ids), lam.size), dtype=np.int64)
    for row, trial_id in enumerate(ids):
        counts[row] = stream(stream_seed, _SAMPLE_TAG, trial_id).poisson(lam)
    return counts
