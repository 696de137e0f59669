"""Experiment orchestration: contrast sweeps, multi-location runs, dataset
export for external classifiers, and prediction scoring.

All randomness flows through counter-based streams keyed by
(baseSeed, replicate, purpose, contrast, trialId), so every result is
byte-identical for a given config regardless of worker count or execution
order.  Detectors inside a (replicate, contrast) cell are evaluated on the
identical photon images (paired trials), asserted via image digests.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .metrics import (ConfusionCounts, SweepCurve, SweepPoint, TARGET_DPRIME,
                      analytic_d_prime, d_prime)
from .observer import HypothesisSet, decide_batch
from .optics import CameraConfig, render_scene
from .patterns import (AutomatonSpec, ContrastPattern, block_scramble,
                       grid_layout, load_contrast_image, make_automaton,
                       make_disk, make_gabor, make_harmonic,
                       make_synthetic_face, place_at_location,
                       random_initial_row)
from .sensor import sample_batch
from .streams import derive_key, stream
from .svm import predict as svm_predict
from .svm import train_svm

_SWEEP_DETECTORS = ("io", "svm")
_ALL_DETECTORS = ("io", "svm", "cnn")
_MAX_UINT16 = 65535
# Cap on elements generated per sampling chunk (bounds peak memory).
_CHUNK_ELEMENTS = 6_000_000

CSV_HEADER = ("contrast", "dprime", "hits", "misses", "falseAlarms",
              "correctRejections", "detector", "seedReplicate")


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved description of one benchmark experiment."""

    stimulus: dict
    camera: CameraConfig = field(default_factory=CameraConfig)
    contrast_grid: tuple[float, ...] = ()
    trials_per_contrast: int = 5000
    detectors: tuple[str, ...] = ("io", "svm")
    replicates: int = 5
    base_seed: int = 0
    svm_train_samples: int = 10000
    svm_c: float = 1.0
    svm_tol: float = 0.001
    svm_max_iter: int = 1000
    target_dprime: float = TARGET_DPRIME
    points_per_decade: int = 12
    max_extensions: int = 3
    workers: int = 1

    def __post_init__(self):
        if not isinstance(self.stimulus, dict) or "kind" not in self.stimulus:
            raise ValueError("stimulus must be a dict with a 'kind' key")
        grid = tuple(float(c) for c in self.contrast_grid)
        if not grid:
            raise ValueError("contrastGrid must not be empty")
        if any(c <= 0 for c in grid):
            raise ValueError("contrastGrid values must all be > 0")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("contrastGrid must be strictly increasing")
        object.__setattr__(self, "contrast_grid", grid)
        object.__setattr__(self, "detectors", tuple(self.detectors))
        unknown = set(self.detectors) - set(_ALL_DETECTORS)
        if not self.detectors or unknown:
            raise ValueError(f"detectors must be a non-empty subset of {_ALL_DETECTORS}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.trials_per_contrast < 1:
            raise ValueError("trialsPerContrast must be >= 1")
        if self.svm_train_samples < 2 or self.svm_train_samples % 2:
            raise ValueError("svmTrainSamples must be an even count >= 2 (balanced classes)")
        if self.points_per_decade < 1:
            raise ValueError("pointsPerDecade must be >= 1")
        if self.max_extensions < 0:
            raise ValueError("maxExtensions must be >= 0")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    _KEYS = {
        "stimulus": "stimulus",
        "camera": "camera",
        "contrastGrid": "contrast_grid",
        "trialsPerContrast": "trials_per_contrast",
        "detectors": "detectors",
        "replicates": "replicates",
        "baseSeed": "base_seed",
        "svmTrainSamples": "svm_train_samples",
        "svmC": "svm_c",
        "svmTol": "svm_tol",
        "svmMaxIter": "svm_max_iter",
        "targetDprime": "target_dprime",
        "pointsPerDecade": "points_per_decade",
        "maxExtensions": "max_extensions",
        "workers": "workers",
    }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = set(data) - set(cls._KEYS) - {"multiLocation"}
        if unknown:
            raise ValueError(f"unknown experiment config keys: {sorted(unknown)}")
        kwargs = {attr: data[key] for key, attr in cls._KEYS.items() if key in data}
        if "camera" in kwargs and isinstance(kwargs["camera"], dict):
            kwargs["camera"] = CameraConfig.from_dict(kwargs["camera"])
        return cls(**kwargs)

    def as_dict(self) -> dict:
        out = {}
        for key, attr in self._KEYS.items():
            value = getattr(self, attr)
            if attr == "camera":
                value = value.as_dict()
            elif isinstance(value, tuple):
                value = list(value)
            out[key] = value
        return out


@dataclass(frozen=True)
class MultiLocationRun:
    """Parameters of a location-uncertainty experiment on top of a config."""

    location_counts: tuple[int, ...]
    patch_width: int
    patch_height: int

    def __post_init__(self):
        counts = tuple(int(n) for n in self.location_counts)
        if not counts or any(n < 1 for n in counts):
            raise ValueError("locationCounts must be positive integers")
        object.__setattr__(self, "location_counts", counts)
        if self.patch_width < 1 or self.patch_height < 1:
            raise ValueError("patch dimensions must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "MultiLocationRun":
        known = {"locationCounts": "location_counts", "patchWidth": "patch_width",
                 "patchHeight": "patch_height"}
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown multiLocation keys: {sorted(unknown)}")
        return cls(**{attr: data[key] for key, attr in known.items() if key in data})


@dataclass(frozen=True)
class SweepResult:
    config: ExperimentConfig
    curves: dict  # detector -> tuple of SweepCurve, one per replicate
    summary: dict
    csv_text: str


@dataclass(frozen=True)
class MultiLocationResult:
    config: ExperimentConfig
    run: MultiLocationRun
    curves: dict  # (detector, locationCount) -> tuple of SweepCurve
    summary: dict
    csv_text: str


def replicate_seed(base_seed: int, index: int) -> int:
    """Per-replicate root seed; all of a replicate's streams descend from it."""
    return derive_key(base_seed, "replicate", index)


def build_pattern(spec: dict, camera: CameraConfig,
                  width: int | None = None, height: int | None = None) -> ContrastPattern:
    """Instantiate the stimulus described by a JSON-style spec dict.

    Dimensions default to the sensor grid; `width`/`height` arguments (used
    for multi-location patches) override that default, and explicit keys in
    the spec override both.
    """
    spec = dict(spec)
    kind = spec.pop("kind", None)
    w = int(spec.pop("width", width if width is not None else camera.sensor_width))
    h = int(spec.pop("height", height if height is not None else camera.sensor_height))
    target_std = float(spec.pop("targetStd", 0.7071))
    if kind == "harmonic":
        return make_harmonic(spec.pop("freq"), spec.pop("phase", 0.0),
                             spec.pop("orientation", 0.0), w, h)
    if kind == "gabor":
        return make_gabor(spec.pop("freq"), spec.pop("phase", 0.0),
                          spec.pop("orientation", 0.0), spec.pop("sigma", w / 5.0), w, h)
    if kind == "disk":
        return make_disk(spec.pop("radius"), w, h)
    if kind == "image":
        return load_contrast_image(spec.pop("path"), target_std)
    if kind == "automaton":
        initial = spec.pop("initialRow", None)
        if initial is None:
            initial = random_initial_row(w, spec.pop("initSeed", 0))
        auto = AutomatonSpec(rule=spec.pop("rule"), rows=h, cols=w,
                             initial_row=tuple(initial),
                             boundary=spec.pop("boundary", "wrap"))
        return make_automaton(auto, target_std)
    if kind == "face":
        return make_synthetic_face(spec.pop("index", 0), w, h, target_std)
    if kind == "scramble":
        base = build_pattern(spec.pop("base"), camera, w, h)
        return block_scramble(base, spec.pop("blockSize"), spec.pop("permutationSeed"))
    raise ValueError(f"unknown stimulus kind {kind!r}")


def contrast_for_dprime(pattern: ContrastPattern, camera: CameraConfig,
                        target: float, lo: float = 1e-8, hi: float = 1.0,
                        rel_tol: float = 1e-10) -> float:
    """Contrast at which the analytic d' reaches ``target``, by bisection."""
    noise = render_scene(pattern, 0.0, camera).lam

    def analytic(c):
        return analytic_d_prime(noise, render_scene(pattern, c, camera).lam)

    if analytic(lo) > target:
        raise ValueError(f"analytic d' already exceeds {target} at contrast {lo}")
    if analytic(hi) < target:
        raise ValueError(f"analytic d' stays below {target} up to contrast {hi}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if analytic(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rel_tol * hi:
            break
    return 0.5 * (lo + hi)


def _chunk_rows(n_pixels: int, n_trials: int) -> int:
    return max(1, min(n_trials, _CHUNK_ELEMENTS // max(1, n_pixels)))


def _check_uint16(counts: np.ndarray) -> np.ndarray:
    peak = int(counts.max(initial=0))
    if peak > _MAX_UINT16:
        raise ValueError(f"photon count {peak} overflows uint16")
    return counts.astype(np.uint16)


def _train_svm_for_cell(cfg: ExperimentConfig, rep_seed: int, contrast: float,
                        scenes_by_label, location_stream_tag: str | None = None,
                        n_locations: int = 1):
    """Fresh SVM per (replicate, contrast) cell on balanced seeded samples.

    scenes_by_label maps label 0 to the noise scene and label 1 to the
    signal scene(s); with several signal scenes (multi-location), each
    signal training sample draws a seeded uniform location.
    """
    n_train = cfg.svm_train_samples
    half = n_train // 2
    n_pixels = scenes_by_label[0].width * scenes_by_label[0].height
    counts = np.empty((n_train, n_pixels), dtype=np.uint16)
    labels = np.concatenate([np.ones(half, dtype=np.int64),
                             np.zeros(n_train - half, dtype=np.int64)])

    sig_seed = derive_key(rep_seed, "train-signal", float(contrast))
    noise_seed = derive_key(rep_seed, "train-noise", float(contrast))
    if n_locations > 1:
        loc_rng = stream(rep_seed, location_stream_tag or "train-locations",
                         float(contrast), n_locations)
        locations = loc_rng.integers(0, n_locations, size=half)
    else:
        locations = np.zeros(half, dtype=np.int64)

    signal_scenes = scenes_by_label[1]
    for loc in range(n_locations):
        ids = np.flatnonzero(locations == loc)
        step = _chunk_rows(n_pixels, ids.size)
        for start in range(0, ids.size, step):
            rows = ids[start:start + step]
            counts[rows] = _check_uint16(sample_batch(signal_scenes[loc], sig_seed, rows))
    step = _chunk_rows(n_pixels, n_train - half)
    for start in range(half, n_train, step):
        rows = range(start - half, min(start + step, n_train) - half)
        chunk = sample_batch(scenes_by_label[0], noise_seed, rows)
        counts[start:start + len(chunk)] = _check_uint16(chunk)
    return train_svm(counts, labels, cfg.camera.mean_level,
                     cfg.svm_c, cfg.svm_tol, cfg.svm_max_iter)


def _evaluate_detectors(cfg: ExperimentConfig, hset: HypothesisSet, model,
                        batches):
    """Run every configured detector over identical image batches.

    ``batches`` yields (is_signal, counts_chunk, true_locations or None).
    Returns per-detector ConfusionCounts plus the shared image digest and
    the ideal observer's localization accuracy (multi-hypothesis sets).
    """
    digests = {det: hashlib.blake2b(digest_size=16) for det in cfg.detectors}
    tallies = {det: {"sig": 0, "sig_n": 0, "noise": 0, "noise_n": 0}
               for det in cfg.detectors}
    localized = 0
    localizable = 0

    for is_signal, chunk, true_locations in batches:
        chunk_u16 = _check_uint16(chunk)
        payload = chunk_u16.tobytes()
        decisions = {}
        if "io" in cfg.detectors:
            idx = decide_batch(chunk, hset)
            decisions["io"] = idx != 0
            if is_signal and true_locations is not None:
                localized += int(np.count_nonzero(idx == true_locations + 1))
                localizable += idx.size
        if "svm" in cfg.detectors:
            decisions["svm"] = svm_predict(model, chunk, cfg.camera.mean_level) == 1
        for det in cfg.detectors:
            digests[det].update(payload)
            tally = tallies[det]
            flags = decisions[det]
            if is_signal:
                tally["sig"] += int(np.count_nonzero(flags))
                tally["sig_n"] += flags.size
            else:
                tally["noise"] += int(np.count_nonzero(flags))
                tally["noise_n"] += flags.size

    hex_digests = {det: d.hexdigest() for det, d in digests.items()}
    reference = next(iter(hex_digests.values()))
    if any(d != reference for d in hex_digests.values()):
        raise RuntimeError("detectors evaluated on different images within a cell")

    per_detector = {}
    for det, tally in tallies.items():
        counts = ConfusionCounts(tally["sig"], tally["sig_n"] - tally["sig"],
                                 tally["noise"], tally["noise_n"] - tally["noise"])
        per_detector[det] = {
            "hits": counts.hits, "misses": counts.misses,
            "falseAlarms": counts.false_alarms,
            "correctRejections": counts.correct_rejections,
            "dprime": d_prime(counts),
        }
    localization = localized / localizable if localizable else None
    return per_detector, reference, localization


def _test_batches(cfg, rep_seed, contrast, noise_scene, signal_scenes, n_locations):
    """Generator of paired-trial evaluation chunks for one cell."""
    n = cfg.trials_per_contrast
    n_pixels = noise_scene.width * noise_scene.height
    sig_seed = derive_key(rep_seed, "test-signal", float(contrast))
    noise_seed = derive_key(rep_seed, "test-noise", float(contrast))
    if n_locations > 1:
        loc_rng = stream(rep_seed, "test-locations", float(contrast), n_locations)
        locations = loc_rng.integers(0, n_locations, size=n)
    else:
        locations = np.zeros(n, dtype=np.int64)

    step = _chunk_rows(n_pixels, n)
    for start in range(0, n, step):
        ids = np.arange(start, min(start + step, n))
        chunk = np.empty((ids.size, n_pixels), dtype=np.int64)
        chunk_locs = locations[ids]
        for loc in np.unique(chunk_locs):
            rows = chunk_locs == loc
            chunk[rows] = sample_batch(signal_scenes[loc], sig_seed, ids[rows])
        yield True, chunk, chunk_locs
    for start in range(0, n, step):
        ids = range(start, min(start + step, n))
        yield False, sample_batch(noise_scene, noise_seed, ids), None


def _evaluate_cell(payload: tuple) -> dict:
    """One (replicate, contrast) cell; pure function of its arguments."""
    cfg_dict, run_dict, n_locations, rep, contrast = payload
    cfg = ExperimentConfig.from_dict(cfg_dict)
    camera = cfg.camera
    rep_seed = replicate_seed(cfg.base_seed, rep)

    if run_dict is None:
        pattern = build_pattern(cfg.stimulus, camera)
        signal_patterns = [pattern]
    else:
        run = MultiLocationRun.from_dict(run_dict)
        patch = build_pattern(cfg.stimulus, camera, run.patch_width, run.patch_height)
        layout = grid_layout(n_locations, camera.sensor_width, camera.sensor_height,
                             run.patch_width, run.patch_height)
        signal_patterns = [place_at_location(patch, layout, i) for i in range(n_locations)]

    noise_scene = render_scene(signal_patterns[0], 0.0, camera)
    signal_scenes = [render_scene(p, contrast, camera) for p in signal_patterns]
    hset = HypothesisSet.equal_priors([noise_scene] + signal_scenes)

    model = None
    svm_meta = None
    if "svm" in cfg.detectors:
        model = _train_svm_for_cell(cfg, rep_seed, contrast,
                                    {0: noise_scene, 1: signal_scenes},
                                    "train-locations", n_locations)
        svm_meta = {k: model.training_meta[k]
                    for k in ("iterations", "converged", "objective")}

    batches = _test_batches(cfg, rep_seed, contrast, noise_scene,
                            signal_scenes, n_locations)
    per_detector, digest, localization = _evaluate_detectors(cfg, hset, model, batches)

    return {
        "replicate": rep,
        "contrast": contrast,
        "locationCount": n_locations,
        "detectors": per_detector,
        "imageDigest": digest,
        "clippedFraction": max(s.clipped_fraction for s in signal_scenes),
        "svmTraining": svm_meta,
        "localizationAccuracy": localization,
    }


def _run_payloads(payloads, workers: int):
    if workers <= 1:
        return [_evaluate_cell(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_evaluate_cell, payloads))


def _has_bracket(points: list[SweepPoint], target: float) -> bool:
    return any(lo.dprime < target <= hi.dprime for lo, hi in zip(points, points[1:]))


def _extended_points(grid: list[float], points_per_decade: int) -> list[float]:
    last = grid[-1]
    return [last * 10.0 ** (k / points_per_decade)
            for k in range(1, points_per_decade + 1)]


def _sweep_cells(cfg: ExperimentConfig, run_dict: dict | None, n_locations: int):
    """Evaluate all cells, extending each replicate's grid upward (one decade
    at a time, bounded by maxExtensions) while any detector's curve fails to
    bracket the target d' but could still reach it."""
    grids = {r: list(cfg.contrast_grid) for r in range(cfg.replicates)}
    extensions = {r: 0 for r in range(cfg.replicates)}
    cells: dict[tuple[int, float], dict] = {}
    pending = [(r, c) for r in range(cfg.replicates) for c in grids[r]]

    while pending:
        payloads = [(cfg.as_dict(), run_dict, n_locations, r, c) for r, c in pending]
        for cell in _run_payloads(payloads, cfg.workers):
            cells[(cell["replicate"], cell["contrast"])] = cell
        pending = []
        for r in range(cfg.replicates):
            if extensions[r] >= cfg.max_extensions:
                continue
            needs_extension = False
            for det in cfg.detectors:
                points = [SweepPoint(c, cells[(r, c)]["detectors"][det]["dprime"])
                          for c in grids[r]]
                if _has_bracket(points, cfg.target_dprime):
                    continue
                if points[-1].dprime < cfg.target_dprime:
                    needs_extension = True
            if needs_extension:
                new_points = _extended_points(grids[r], cfg.points_per_decade)
                grids[r].extend(new_points)
                extensions[r] += 1
                pending.extend((r, c) for c in new_points)
    return cells, grids, extensions


def _curves_from_cells(cfg, cells, grids, detector) -> tuple[SweepCurve, ...]:
    curves = []
    for r in range(cfg.replicates):
        points = []
        for c in grids[r]:
            d = cells[(r, c)]["detectors"][detector]
            counts = ConfusionCounts(d["hits"], d["misses"], d["falseAlarms"],
                                     d["correctRejections"])
            points.append(SweepPoint(c, d["dprime"], counts))
        curves.append(SweepCurve.from_points(points, cfg.target_dprime))
    return tuple(curves)


def _sensitivity_summary(curves: tuple[SweepCurve, ...], extensions: dict) -> dict:
    replicates = []
    values = []
    for r, curve in enumerate(curves):
        entry = {
            "replicate": r,
            "thresholdContrast": curve.threshold_contrast,
            "sensitivity": curve.sensitivity,
            "gridExtensions": extensions[r],
        }
        if curve.sensitivity is None:
            entry["error"] = "threshold not bracketed"
        else:
            values.append(curve.sensitivity)
        replicates.append(entry)
    mean = float(np.mean(values)) if values else None
    std = float(np.std(values, ddof=1)) if len(values) > 1 else (0.0 if values else None)
    return {"replicates": replicates, "sensitivityMean": mean,
            "sensitivityStd": std, "nThresholded": len(values)}


def _csv_from_cells(cfg, cells, grids, extra_location_column: bool = False) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(CSV_HEADER) + (["locationCount"] if extra_location_column else [])
    writer.writerow(header)
    for det in sorted(cfg.detectors):
        for r in range(cfg.replicates):
            for c in sorted(grids[r]):
                cell = cells[(r, c)]
                d = cell["detectors"][det]
                row = [repr(float(c)), repr(float(d["dprime"])), d["hits"], d["misses"],
                       d["falseAlarms"], d["correctRejections"], det, r]
                if extra_location_column:
                    row.append(cell["locationCount"])
                writer.writerow(row)
    return buf.getvalue()


def _cell_audit(cells, grids, replicates) -> list[dict]:
    audit = []
    for r in range(replicates):
        for c in grids[r]:
            cell = cells[(r, c)]
            audit.append({
                "replicate": r,
                "contrast": c,
                "locationCount": cell["locationCount"],
                "imageDigest": cell["imageDigest"],
                "clippedFraction": cell["clippedFraction"],
                "svmTraining": cell["svmTraining"],
                "localizationAccuracy": cell["localizationAccuracy"],
            })
    return audit


def _svm_decisions(cfg: ExperimentConfig) -> dict:
    return {
        "C": cfg.svm_c,
        "tol": cfg.svm_tol,
        "maxIter": cfg.svm_max_iter,
        "trainingSamples": cfg.svm_train_samples,
        "featureScaling": "raw photon counts scaled by 1/meanLevel "
                          f"(1/{cfg.camera.mean_level:g})",
    }


def _write_result_dir(out_dir, cfg, csv_text, summary):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(csv_text)
    (out / "summary.json").write_text(_dump_json(summary))
    (out / "config.json").write_text(_dump_json(
        {"version": __version__, "config": cfg.as_dict()}))


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def run_sweep(config: ExperimentConfig, out_dir=None) -> SweepResult:
    """Measure d' versus contrast for each configured detector.

    Every (replicate, contrast) cell trains a fresh SVM (when enabled) and
    evaluates all detectors on identical seeded test trials; thresholds are
    interpolated at the target d' and summarized as mean/std sensitivity
    across replicates.  Replicates whose curves never bracket the target
    (even after grid extension) carry a "threshold not bracketed" error and
    are excluded from the mean.
    """
    if "cnn" in config.detectors:
        raise ValueError("the cnn detector is evaluated externally: "
                         "use export-dataset and score")
    cells, grids, extensions = _sweep_cells(config, None, 1)
    curves = {det: _curves_from_cells(config, cells, grids, det)
              for det in config.detectors}
    summary = {
        "version": __version__,
        "baseSeed": config.base_seed,
        "targetDprime": config.target_dprime,
        "config": config.as_dict(),
        "detectors": {det: _sensitivity_summary(curves[det], extensions)
                      for det in config.detectors},
        "cells": _cell_audit(cells, grids, config.replicates),
    }
    if "svm" in config.detectors:
        summary["svmDecisions"] = _svm_decisions(config)
    csv_text = _csv_from_cells(config, cells, grids)
    if out_dir is not None:
        _write_result_dir(out_dir, config, csv_text, summary)
    return SweepResult(config, curves, summary, csv_text)


def run_multi_location(config: ExperimentConfig, run: MultiLocationRun,
                       out_dir=None) -> MultiLocationResult:
    """Sensitivity versus number of possible signal locations.

    For each location count N the signal appears at a seeded uniform
    location; the ideal observer decides among N+1 hypotheses (noise plus
    one per location) and any non-noise decision on a signal trial counts
    as a hit (detection, not localization — localization accuracy is
    recorded separately); the SVM trains on present/absent labels.
    """
    if "cnn" in config.detectors:
        raise ValueError("the cnn detector is evaluated externally: "
                         "use export-dataset and score")
    run_dict = {"locationCounts": list(run.location_counts),
                "patchWidth": run.patch_width, "patchHeight": run.patch_height}
    curves = {}
    by_count_summary = {det: [] for det in config.detectors}
    audits = []
    csv_parts = []
    for n_loc in run.location_counts:
        cells, grids, extensions = _sweep_cells(config, run_dict, n_loc)
        for det in config.detectors:
            det_curves = _curves_from_cells(config, cells, grids, det)
            curves[(det, n_loc)] = det_curves
            entry = _sensitivity_summary(det_curves, extensions)
            entry["locationCount"] = n_loc
            by_count_summary[det].append(entry)
        audits.extend(_cell_audit(cells, grids, config.replicates))
        csv_parts.append(_csv_from_cells(config, cells, grids,
                                         extra_location_column=True))
    header, *_ = csv_parts[0].splitlines(keepends=True)
    csv_text = header + "".join("".join(part.splitlines(keepends=True)[1:])
                                for part in csv_parts)
    summary = {
        "version": __version__,
        "baseSeed": config.base_seed,
        "targetDprime": config.target_dprime,
        "config": config.as_dict(),
        "multiLocation": run_dict,
        "detectors": by_count_summary,
        "cells": audits,
    }
    if "svm" in config.detectors:
        summary["svmDecisions"] = _svm_decisions(config)
    if out_dir is not None:
        _write_result_dir(out_dir, config, csv_text, summary)
    return MultiLocationResult(config, run, curves, summary, csv_text)


# ---------------------------------------------------------------------------
# Dataset export and external-prediction scoring


_IMAGE_STREAM_TAG = "dataset-images"
_LABEL_STREAM_TAG = "dataset-label-order"


def _split_labels(count: int, base_seed: int, split: str) -> np.ndarray:
    if count < 2 or count % 2:
        raise ValueError(f"{split} sample count must be even and >= 2 for exact "
                         f"50/50 balance, got {count}")
    labels = np.concatenate([np.ones(count // 2, dtype=np.uint8),
                             np.zeros(count // 2, dtype=np.uint8)])
    order = stream(base_seed, _LABEL_STREAM_TAG, split).permutation(count)
    return labels[order]


def export_dataset(stimulus: dict, camera: CameraConfig, contrast: float,
                   train_count: int, test_count: int, base_seed: int,
                   out_dir) -> dict:
    """Write a self-describing two-class dataset for external classifiers.

    Layout: manifest.json plus one raw little-endian uint16 image tensor and
    one uint8 label vector per split, row-major, samples in trial order.
    Train and test use disjoint global trial ids, so regeneration from the
    manifest is bit-identical and the splits never share an image.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pattern = build_pattern(stimulus, camera)
    scenes = {0: render_scene(pattern, 0.0, camera),
              1: render_scene(pattern, contrast, camera)}
    image_seed = derive_key(base_seed, _IMAGE_STREAM_TAG)
    n_pixels = camera.sensor_width * camera.sensor_height

    splits = {}
    offsets = {"train": 0, "test": train_count}
    for split, count in (("train", train_count), ("test", test_count)):
        labels = _split_labels(count, base_seed, split)
        images_name, labels_name = f"{split}_images.bin", f"{split}_labels.bin"
        with open(out / images_name, "wb") as fh:
            step = _chunk_rows(n_pixels, count)
            for start in range(0, count, step):
                stop = min(start + step, count)
                chunk = np.empty((stop - start, n_pixels), dtype=np.int64)
                for label in (0, 1):
                    rows = np.flatnonzero(labels[start:stop] == label)
                    if rows.size:
                        trial_ids = offsets[split] + start + rows
                        chunk[rows] = sample_batch(scenes[label], image_seed, trial_ids)
                fh.write(_check_uint16(chunk).astype("<u2").tobytes())
        (out / labels_name).write_bytes(labels.tobytes())
        splits[split] = {
            "sampleCount": count,
            "imagesFile": images_name,
            "labelsFile": labels_name,
            "trialIdStart": offsets[split],
            "imageBytes": count * n_pixels * 2,
        }

    manifest = {
        "formatVersion": 1,
        "version": __version__,
        "stimulus": stimulus,
        "camera": camera.as_dict(),
        "contrast": contrast,
        "meanLevel": camera.mean_level,
        "classes": {"0": "noise", "1": "signal"},
        "imageWidth": camera.sensor_width,
        "imageHeight": camera.sensor_height,
        "elementType": "uint16",
        "byteOrder": "little",
        "layout": "row-major",
        "labelType": "uint8",
        "seeds": {"baseSeed": base_seed, "imageStream": _IMAGE_STREAM_TAG,
                  "labelStream": _LABEL_STREAM_TAG},
        "splits": splits,
        "sceneStats": {
            "noiseMeanLambda": float(scenes[0].lam.mean()),
            "signalMeanLambda": float(scenes[1].lam.mean()),
            "signalLambdaStd": float(scenes[1].lam.std()),
            "clippedFraction": scenes[1].clipped_fraction,
        },
    }
    (out / "manifest.json").write_text(_dump_json(manifest))
    return manifest


def load_manifest(path) -> tuple[dict, Path]:
    """Read and validate a dataset manifest; returns (manifest, directory)."""
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    with open(path) as fh:
        manifest = json.load(fh)
    directory = path.parent
    n_pixels = manifest["imageWidth"] * manifest["imageHeight"]
    for split, info in manifest["splits"].items():
        images = directory / info["imagesFile"]
        labels = directory / info["labelsFile"]
        expected = info["sampleCount"] * n_pixels * 2
        if images.stat().st_size != expected:
            raise ValueError(f"{images} is {images.stat().st_size} bytes, "
                             f"manifest declares {expected}")
        if labels.stat().st_size != info["sampleCount"]:
            raise ValueError(f"{labels} is {labels.stat().st_size} bytes, "
                             f"manifest declares {info['sampleCount']}")
    return manifest, directory


def read_labels(manifest: dict, directory, split: str) -> np.ndarray:
    info = manifest["splits"][split]
    return np.fromfile(Path(directory) / info["labelsFile"], dtype=np.uint8)


def read_images(manifest: dict, directory, split: str) -> np.ndarray:
    """Memory-mapped (samples, height, width) uint16 view of a split."""
    info = manifest["splits"][split]
    shape = (info["sampleCount"], manifest["imageHeight"], manifest["imageWidth"])
    return np.memmap(Path(directory) / info["imagesFile"], dtype="<u2",
                     mode="r", shape=shape)


def score_predictions(manifest_path, predictions_path) -> tuple[ConfusionCounts, float]:
    """Join a predictions file (one ASCII 0/1 label per line, test-split
    order) against the manifest's test labels; returns counts and d'."""
    manifest, directory = load_manifest(manifest_path)
    labels = read_labels(manifest, directory, "test")
    with open(predictions_path) as fh:
        lines = [line.strip() for line in fh if line.strip() != ""]
    if len(lines) != labels.size:
        raise ValueError(f"predictions file has {len(lines)} labels, "
                         f"test split has {labels.size}")
    bad = next((line for line in lines if line not in ("0", "1")), None)
    if bad is not None:
        raise ValueError(f"unknown label value {bad!r} in predictions file")
    predictions = np.array([int(line) for line in lines], dtype=np.uint8)
    signal = labels == 1
    predicted = predictions == 1
    counts = ConfusionCounts(
        hits=int(np.count_nonzero(signal & predicted)),
        misses=int(np.count_nonzero(signal & ~predicted)),
        false_alarms=int(np.count_nonzero(~signal & predicted)),
        correct_rejections=int(np.count_nonzero(~signal & ~predicted)),
    )
    return counts, d_prime(counts)
