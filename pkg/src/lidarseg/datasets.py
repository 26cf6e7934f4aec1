"""Dataset assembly: sequence-based splits, keyframe selection, synthetic
dataset generation, and loading of (input, target) training pairs.

Splits are assigned to whole sequences, never to individual frames, so
temporally correlated frames cannot leak between subsets. The greedy
assignment walks a seed-shuffled sequence order and always feeds the
split with the largest remaining frame deficit, forcing one sequence
into every split when supply runs short.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from . import fileio
from .autolabel import LabeledScan
from .labels import UNLABELED
from .neural.training import DEFAULT_DEPTH_SCALE, network_input
from .projection import LidarImage, scan_to_image
from .synth import (
    SensorConfig,
    default_calibration,
    example_scene,
    ground_truth_scan,
    random_scene,
    render_camera,
    render_scan,
    straight_track,
)

SPLIT_NAMES = ("train", "val", "test")
DEFAULT_SPLIT_RATIOS = (0.62, 0.13, 0.25)


def split_sequences(manifest: fileio.DatasetManifest, ratios=DEFAULT_SPLIT_RATIOS,
                    seed: int = 0) -> fileio.DatasetManifest:
    """Assign every sequence to train/val/test, targeting frame-count ratios.

    Deterministic for a fixed seed; each split receives at least one
    sequence. Raises ValueError with fewer than three sequences.
    """
    seqs = manifest.sequences
    if len(seqs) < len(SPLIT_NAMES):
        raise ValueError(f"need at least {len(SPLIT_NAMES)} sequences, got {len(seqs)}")
    total = manifest.frame_count
    targets = {name: r * total for name, r in zip(SPLIT_NAMES, ratios)}
    filled = {name: 0 for name in SPLIT_NAMES}
    seq_count = {name: 0 for name in SPLIT_NAMES}

    order = np.random.default_rng(seed).permutation(len(seqs))
    for position, si in enumerate(order):
        remaining = len(seqs) - position
        empty = [n for n in SPLIT_NAMES if seq_count[n] == 0]
        candidates = empty if len(empty) == remaining else SPLIT_NAMES
        pick = max(candidates, key=lambda n: targets[n] - filled[n])
        seqs[si].split = pick
        filled[pick] += len(seqs[si].frames)
        seq_count[pick] += 1
    return manifest


def select_keyframes(frames, k: int) -> list:
    """k frames spread equally across the input, order preserved.

    Indices are round(i*(N-1)/(k-1)); k = 1 picks the middle frame.
    Collapsing rounds are deduplicated, so fewer than k may come back.
    """
    n = len(frames)
    if k > n:
        raise ValueError(f"cannot select {k} keyframes from {n} frames")
    if k <= 0:
        raise ValueError("keyframe count must be positive")
    if k == 1:
        return [frames[math.floor((n - 1) / 2 + 0.5)]]
    indices = [math.floor(i * (n - 1) / (k - 1) + 0.5) for i in range(k)]
    seen = []
    for i in indices:
        if i not in seen:
            seen.append(i)
    return [frames[i] for i in seen]


def label_grid(image: LidarImage, labeled: LabeledScan) -> np.ndarray:
    """Per-cell class ids for an image, via its point-index map."""
    safe = np.where(image.valid, image.point_index, 0)
    return np.where(image.valid, labeled.labels[safe], UNLABELED).astype(np.uint8)


def split_frames(manifest: fileio.DatasetManifest, split: str | None = None):
    """(sequence, frame) pairs of one split (or all frames when None)."""
    out = []
    for seq in manifest.sequences:
        if split is None or seq.split == split:
            out.extend((seq, f) for f in seq.frames)
    return out


def load_pairs(manifest: fileio.DatasetManifest, split: str | None = None,
               depth_scale: float = DEFAULT_DEPTH_SCALE):
    """Load (network input, target grid) pairs for frames that carry labels."""
    pairs = []
    for _, frame in split_frames(manifest, split):
        if frame.labels is None:
            continue
        labeled = fileio.read_labeled_scan(manifest.resolve(frame.labels))
        image = scan_to_image(labeled.scan)
        pairs.append((network_input(image, depth_scale), label_grid(image, labeled)))
    return pairs


def generate_dataset(out_dir, n_sequences: int, frames_per_sequence: int, seed: int = 0,
                     sensor: SensorConfig | None = None, calib=None, speed_mps: float = 5.0,
                     randomize_scenes: bool = True, camera_offset_us: int = 0) -> Path:
    """Write a full synthetic dataset (scans, semantic images, ground-truth
    labels, pose logs, calibration, manifest) and return the manifest path.

    Sequence s / frame i derive their noise generators from (seed, s, i),
    so any subset regenerates identically.
    """
    out_dir = Path(out_dir)
    sensor = sensor or SensorConfig()
    calib = calib or default_calibration()
    rev = sensor.revolution_us

    sequences = []
    for s in range(n_sequences):
        seq_dir = out_dir / f"seq_{s:02d}"
        seq_dir.mkdir(parents=True, exist_ok=True)
        scene_rng = np.random.default_rng((seed, s))
        scene = random_scene(scene_rng) if randomize_scenes else example_scene()
        span = frames_per_sequence * rev
        track = straight_track(speed_mps, -rev, span + rev)

        track_samples = [fileio.TimedPose(int(t), track.pose_at(int(t)))
                         for t in range(-rev, span + rev + 1, 20_000)]
        fileio.write_pose_log(seq_dir / "poses.csv", track_samples)
        fileio.write_calibration(seq_dir / "calibration.txt", calib)

        frames = []
        for i in range(frames_per_sequence):
            rng = np.random.default_rng((seed, s, i))
            rev_start = i * rev
            t_c = rev_start + camera_offset_us
            scan, gt = render_scan(scene, track, rev_start, sensor, calib.lidar_to_vehicle, rng)
            semantic = render_camera(scene, track, t_c + calib.intrinsics.shutter_interval_us // 2,
                                     calib, sensor.max_range_m)
            stem = f"frame_{i:04d}"
            fileio.write_scan(seq_dir / f"{stem}.llsc", scan)
            fileio.write_pgm(seq_dir / f"{stem}_semantic.pgm", semantic)
            fileio.write_labeled_scan(seq_dir / f"{stem}_gt.llls", ground_truth_scan(scan, gt))
            frames.append(fileio.FrameEntry(
                scan=f"seq_{s:02d}/{stem}.llsc",
                semantic=f"seq_{s:02d}/{stem}_semantic.pgm",
                t_c_us=t_c,
                labels=f"seq_{s:02d}/{stem}_gt.llls",
            ))
        sequences.append(fileio.SequenceEntry(
            id=f"seq_{s:02d}", frames=frames,
            pose_log=f"seq_{s:02d}/poses.csv",
            calibration=f"seq_{s:02d}/calibration.txt",
        ))

    manifest = fileio.DatasetManifest(sequences=sequences, root=out_dir)
    manifest_path = out_dir / "manifest.json"
    fileio.write_manifest(manifest_path, manifest)
    return manifest_path
