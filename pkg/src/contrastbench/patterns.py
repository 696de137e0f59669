"""Spatial signal patterns: harmonics, Gabors, disks, images, CA textures.

Every generator returns a zero-mean ContrastPattern.  Peak-normalized
patterns have max - min = 2, so a scene built as mean*(1 + c*pattern) has
peak contrast (max - min) / (2 * mean) = c.  Std-normalized patterns
(images, textures) declare their standard deviation instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .streams import stream

_MEAN_TOL = 1e-9
_GRAYSCALE_MODES = {"L", "I", "I;16", "I;16B", "I;16L", "F"}


class ZeroContrastPattern(ValueError):
    """Raised when a generator would produce a constant (signal-free) image."""


@dataclass(frozen=True)
class ContrastPattern:
    """Zero-mean spatial signal shape, prior to contrast scaling.

    normalization is "peak" (max - min = 2) or "std" (standard deviation
    equals target_std).  A peak pattern may be degenerately all-zero, e.g.
    a zero-frequency harmonic.
    """

    width: int
    height: int
    values: np.ndarray
    normalization: str
    target_std: float | None = None

    def __post_init__(self):
        v = self.values
        if v.shape != (self.height, self.width):
            raise ValueError(f"values shape {v.shape} != ({self.height}, {self.width})")
        if abs(float(v.mean())) > _MEAN_TOL:
            raise ValueError(f"pattern mean {float(v.mean()):g} exceeds {_MEAN_TOL}")
        if self.normalization == "peak":
            ptp = float(v.max() - v.min())
            if ptp != 0.0 and abs(ptp - 2.0) > _MEAN_TOL:
                raise ValueError(f"peak-normalized pattern has max-min = {ptp!r}")
        elif self.normalization == "std":
            if self.target_std is None:
                raise ValueError("std-normalized pattern needs target_std")
            if abs(float(v.std()) - self.target_std) > _MEAN_TOL:
                raise ValueError(f"pattern std {float(v.std()):g} != {self.target_std}")
        else:
            raise ValueError(f"unknown normalization {self.normalization!r}")


def _finish_peak(values: np.ndarray, *, allow_flat: bool = False) -> np.ndarray:
    values = values - values.mean()
    ptp = float(values.max() - values.min())
    if ptp < 1e-12:
        if allow_flat:
            return np.zeros_like(values)
        raise ZeroContrastPattern("zero-contrast pattern")
    return values * (2.0 / ptp)


def _finish_std(values: np.ndarray, target_std: float) -> np.ndarray:
    if target_std <= 0:
        raise ValueError(f"target std must be positive, got {target_std!r}")
    values = values - values.mean()
    s = float(values.std())
    if s < 1e-12:
        raise ZeroContrastPattern("zero-contrast pattern")
    return values * (target_std / s)


def _wave(freq: float, phase: float, orientation: float, width: int, height: int) -> np.ndarray:
    x = np.arange(width, dtype=np.float64)
    y = np.arange(height, dtype=np.float64)
    xx, yy = np.meshgrid(x, y)
    arg = 2.0 * math.pi * freq * (xx * math.cos(orientation) + yy * math.sin(orientation)) / width
    return np.cos(arg + phase)


def make_harmonic(freq: float, phase: float = 0.0, orientation: float = 0.0,
                  width: int = 238, height: int = 238) -> ContrastPattern:
    """Cosine grating, frequency in cycles per image width.

    A zero-frequency grating reduces to an all-zero pattern once the DC
    level is removed.
    """
    if freq < 0:
        raise ValueError(f"frequency must be >= 0, got {freq!r}")
    if width < 1 or height < 1:
        raise ValueError("grid must be at least 1x1")
    if freq > width / 2:
        raise ValueError(f"aliased frequency: {freq} exceeds Nyquist {width / 2}")
    values = _finish_peak(_wave(freq, phase, orientation, width, height), allow_flat=True)
    return ContrastPattern(width, height, values, "peak")


def make_gabor(freq: float, phase: float = 0.0, orientation: float = 0.0,
               sigma: float = 8.0, width: int = 238, height: int = 238) -> ContrastPattern:
    """Harmonic under a centered Gaussian envelope of scale sigma pixels."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    if freq < 0:
        raise ValueError(f"frequency must be >= 0, got {freq!r}")
    if freq > width / 2:
        raise ValueError(f"aliased frequency: {freq} exceeds Nyquist {width / 2}")
    x = np.arange(width, dtype=np.float64) - (width - 1) / 2.0
    y = np.arange(height, dtype=np.float64) - (height - 1) / 2.0
    xx, yy = np.meshgrid(x, y)
    envelope = np.exp(-(xx * xx + yy * yy) / (2.0 * sigma * sigma))
    values = _finish_peak(_wave(freq, phase, orientation, width, height) * envelope)
    return ContrastPattern(width, height, values, "peak")


def make_disk(radius: float, width: int = 238, height: int = 238) -> ContrastPattern:
    """Filled disk indicator; a pixel is inside iff its center (at integer
    + 0.5 coordinates) lies within ``radius`` of the image center."""
    if not 0 < radius <= min(width, height) / 2:
        raise ValueError(f"radius {radius!r} outside (0, {min(width, height) / 2}]")
    x = np.arange(width, dtype=np.float64) + 0.5 - width / 2.0
    y = np.arange(height, dtype=np.float64) + 0.5 - height / 2.0
    xx, yy = np.meshgrid(x, y)
    inside = (xx * xx + yy * yy) <= radius * radius
    return ContrastPattern(width, height, _finish_peak(inside.astype(np.float64)), "peak")


def disk_pixel_count(radius: float, width: int = 238, height: int = 238) -> int:
    """Number of pixel centers inside the disk (same membership rule)."""
    x = np.arange(width, dtype=np.float64) + 0.5 - width / 2.0
    y = np.arange(height, dtype=np.float64) + 0.5 - height / 2.0
    xx, yy = np.meshgrid(x, y)
    return int(np.count_nonzero((xx * xx + yy * yy) <= radius * radius))


def load_contrast_image(path, target_std: float = 0.7071) -> ContrastPattern:
    """Load a grayscale PGM/PNG file as a std-normalized contrast pattern."""
    try:
        with Image.open(path) as img:
            if img.mode not in _GRAYSCALE_MODES:
                raise ValueError(f"expected a grayscale image, got mode {img.mode!r}")
            values = np.asarray(img, dtype=np.float64)
    except ValueError:
        raise
    except Exception as exc:
        raise ValueError(f"cannot read image {path}: {exc}") from exc
    height, width = values.shape
    values = _finish_std(values, target_std)
    return ContrastPattern(width, height, values, "std", target_std=target_std)


@dataclass(frozen=True)
class AutomatonSpec:
    """Elementary (3-neighbor) cellular automaton texture recipe."""

    rule: int
    rows: int
    cols: int
    initial_row: tuple[int, ...]
    boundary: str = "wrap"

    def __post_init__(self):
        if not 0 <= self.rule <= 255:
            raise ValueError(f"rule must be in [0, 255], got {self.rule}")
        if len(self.initial_row) != self.cols:
            raise ValueError(f"initial row length {len(self.initial_row)} != cols {self.cols}")
        if any(b not in (0, 1) for b in self.initial_row):
            raise ValueError("initial row must be 0/1 bits")
        if self.boundary not in ("wrap", "zero"):
            raise ValueError(f"boundary must be 'wrap' or 'zero', got {self.boundary!r}")


def random_initial_row(cols: int, seed: int) -> tuple[int, ...]:
    """Seeded uniform random bit row for automaton initial conditions."""
    return tuple(int(b) for b in stream(seed, "ca-init").integers(0, 2, size=cols))


def evolve_automaton(spec: AutomatonSpec) -> np.ndarray:
    """Binary (rows, cols) evolution; row 0 is the initial condition."""
    table = np.array([(spec.rule >> k) & 1 for k in range(8)], dtype=np.uint8)
    grid = np.zeros((spec.rows, spec.cols), dtype=np.uint8)
    grid[0] = spec.initial_row
    for t in range(1, spec.rows):
        row = grid[t - 1]
        if spec.boundary == "wrap":
            left, right = np.roll(row, 1), np.roll(row, -1)
        else:
            left = np.concatenate(([0], row[:-1]))
            right = np.concatenate((row[1:], [0]))
        grid[t] = table[4 * left + 2 * row + right]
    return grid


def make_automaton(spec: AutomatonSpec, target_std: float = 0.7071) -> ContrastPattern:
    """Evolve the automaton and std-normalize the binary texture."""
    grid = evolve_automaton(spec).astype(np.float64)
    values = _finish_std(grid, target_std)
    return ContrastPattern(spec.cols, spec.rows, values, "std", target_std=target_std)


def tile_permutation(n_tiles: int, seed: int) -> np.ndarray:
    """Seeded uniform permutation used by block_scramble; fixed per seed."""
    return stream(seed, "tile-perm").permutation(n_tiles)


def block_scramble(pattern: ContrastPattern, block_size: int, permutation_seed: int) -> ContrastPattern:
    """Reorder block_size x block_size tiles by a seeded permutation.

    The permutation is a function of the seed alone, so the scrambled
    pattern is a fixed signal shape, not fresh noise per trial.
    """
    h, w = pattern.height, pattern.width
    if h % block_size or w % block_size:
        raise ValueError(f"dimensions {w}x{h} not divisible by block size {block_size}")
    ny, nx = h // block_size, w // block_size
    tiles = pattern.values.reshape(ny, block_size, nx, block_size)
    tiles = tiles.transpose(0, 2, 1, 3).reshape(ny * nx, block_size, block_size)
    perm = tile_permutation(ny * nx, permutation_seed)
    scrambled = tiles[perm].reshape(ny, nx, block_size, block_size)
    values = scrambled.transpose(0, 2, 1, 3).reshape(h, w)
    return ContrastPattern(w, h, values, pattern.normalization, target_std=pattern.target_std)


@dataclass(frozen=True)
class MultiLocationLayout:
    """Non-overlapping patch positions inside a full-size image."""

    locations: tuple[tuple[int, int], ...]  # (x, y) upper-left offsets
    patch_width: int
    patch_height: int
    image_width: int
    image_height: int

    def __post_init__(self):
        boxes = []
        for (x, y) in self.locations:
            if x < 0 or y < 0 or x + self.patch_width > self.image_width \
                    or y + self.patch_height > self.image_height:
                raise ValueError(f"patch at ({x}, {y}) leaves the image")
            boxes.append((x, y, x + self.patch_width, y + self.patch_height))
        for i, a in enumerate(boxes):
            for b in boxes[i + 1:]:
                if a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]:
                    raise ValueError("patch placements overlap")


def grid_layout(count: int, image_width: int, image_height: int,
                patch_width: int, patch_height: int) -> MultiLocationLayout:
    """Equally spaced rows x cols arrangement for 1, 2, 4, 8, 16, ... patches."""
    shapes = {1: (1, 1), 2: (1, 2), 4: (2, 2), 8: (2, 4), 16: (4, 4)}
    if count in shapes:
        rows, cols = shapes[count]
    else:
        rows = int(math.floor(math.sqrt(count)))
        while count % rows:
            rows -= 1
        cols = count // rows
    cell_w, cell_h = image_width // cols, image_height // rows
    if patch_width > cell_w or patch_height > cell_h:
        raise ValueError(f"{count} patches of {patch_width}x{patch_height} do not fit")
    locations = []
    for r in range(rows):
        for c in range(cols):
            locations.append((c * cell_w + (cell_w - patch_width) // 2,
                              r * cell_h + (cell_h - patch_height) // 2))
    return MultiLocationLayout(tuple(locations), patch_width, patch_height,
                               image_width, image_height)


def place_at_location(patch: ContrastPattern, layout: MultiLocationLayout,
                      index: int) -> ContrastPattern:
    """Embed a peak-normalized patch at layout.locations[index] in a zero field."""
    if not 0 <= index < len(layout.locations):
        raise IndexError(f"location index {index} out of range [0, {len(layout.locations)})")
    if (patch.width, patch.height) != (layout.patch_width, layout.patch_height):
        raise ValueError("patch size does not match the layout")
    if patch.normalization != "peak":
        raise ValueError("only peak-normalized patches keep their contrast when placed")
    x, y = layout.locations[index]
    values = np.zeros((layout.image_height, layout.image_width), dtype=np.float64)
    values[y:y + patch.height, x:x + patch.width] = patch.values
    return ContrastPattern(layout.image_width, layout.image_height, values, "peak")


def make_synthetic_face(index: int, width: int = 238, height: int = 238,
                        target_std: float = 0.7071) -> ContrastPattern:
    """Deterministic face-like blob arrangement (fallback for photo sets).

    A bright head Gaussian with darker eye/mouth blobs and a slight nose
    highlight; ``index`` seeds small position and amplitude jitter so the
    set contains distinct exemplars.
    """
    rng = stream(index, "synthetic-face")
    x = np.arange(width, dtype=np.float64) - (width - 1) / 2.0
    y = np.arange(height, dtype=np.float64) - (height - 1) / 2.0
    xx, yy = np.meshgrid(x, y)
    scale = min(width, height)

    def blob(cx, cy, sx, sy, amp):
        return amp * np.exp(-(((xx - cx) / sx) ** 2 + ((yy - cy) / sy) ** 2) / 2.0)

    jit = lambda s: float(rng.uniform(-s, s)) * scale
    amp = lambda a: a * float(rng.uniform(0.85, 1.15))
    values = blob(jit(0.01), jit(0.01), 0.26 * scale, 0.34 * scale, amp(1.0))
    eye_dx, eye_y = 0.15 * scale + jit(0.01), -0.10 * scale + jit(0.01)
    values += blob(-eye_dx, eye_y, 0.05 * scale, 0.035 * scale, amp(-0.9))
    values += blob(+eye_dx, eye_y, 0.05 * scale, 0.035 * scale, amp(-0.9))
    values += blob(jit(0.005), 0.06 * scale + jit(0.01), 0.03 * scale, 0.06 * scale, amp(0.35))
    values += blob(jit(0.005), 0.22 * scale + jit(0.01), 0.11 * scale, 0.035 * scale, amp(-0.7))
    values = _finish_std(values, target_std)
    return ContrastPattern(width, height, values, "std", target_std=target_std)


def write_pgm(path, values: np.ndarray, maxval: int = 65535) -> None:
    """Write a 2-D array as binary PGM, min..max mapped to 0..maxval."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    scaled = np.zeros_like(v) if hi == lo else (v - lo) * (maxval / (hi - lo))
    data = np.round(scaled).astype(">u2" if maxval > 255 else "u1")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{v.shape[1]} {v.shape[0]}\n{maxval}\n".encode("ascii"))
        fh.write(data.tobytes())
