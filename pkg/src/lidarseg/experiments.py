"""Training-strategy comparison on synthetic scenes.

Builds, for one seed, the three-way comparison between
  - training on a small exactly-labeled keyframe set,
  - training on a large automatically labeled corpus whose labels carry
    realistic transfer noise (calibration jitter and boundary bleed), and
  - pretraining on the large corpus followed by fine-tuning on the small
    exact set at a reduced learning rate,
all evaluated by mean IoU on exactly-labeled frames from held-out scenes.

Scenes are split between training and testing wholesale (never frames),
mirroring the sequence-based split used for real recordings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .autolabel import FrameBundle, autolabel_frame
from .datasets import label_grid, select_keyframes
from .evaluation import ConfusionMatrix
from .geometry import CalibrationSet, RigidTransform
from .neural import FINETUNE_LR, LiLaNet, REDUCED_WIDTHS, TrainConfig, network_input, predict, train
from .projection import scan_to_image
from .synth import SensorConfig, default_calibration, ground_truth_scan, random_scene, render_camera, render_scan, straight_track


@dataclass
class StrategyConfig:
    seed: int = 0
    columns: int = 128
    camera_width: int = 160
    camera_height: int = 64
    train_scenes: int = 8
    test_scenes: int = 4
    frames_per_scene: int = 3
    manual_keyframes: int = 4
    speed_mps: float = 5.0
    jitter_rot_rad: float = np.radians(0.9)
    jitter_trans_m: float = 0.06
    bleed_probability: float = 0.6
    pretrain_iterations: int = 500
    manual_iterations: int = 500
    finetune_iterations: int = 250
    batch_size: int = 5
    widths: tuple = REDUCED_WIDTHS


@dataclass
class Frame:
    input: np.ndarray          # (2, H, W) network input
    gt: np.ndarray             # (H, W) exact labels
    auto: np.ndarray | None    # (H, W) noisy transferred labels


def _jittered_calibration(calib: CalibrationSet, rng: np.random.Generator,
                          rot_rad: float, trans_m: float) -> CalibrationSet:
    """Perturb the camera mounting the way real extrinsics drift."""
    angles = rng.normal(0.0, rot_rad, 2)
    cy, sy = np.cos(angles[0]), np.sin(angles[0])
    cp, sp = np.cos(angles[1]), np.sin(angles[1])
    yaw = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    pitch = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    wobble = RigidTransform(yaw @ pitch, rng.normal(0.0, trans_m, 3))
    return CalibrationSet(
        lidar_to_vehicle=calib.lidar_to_vehicle,
        camera_to_vehicle=wobble @ calib.camera_to_vehicle,
        intrinsics=calib.intrinsics,
    )


def _bleed_boundaries(semantic: np.ndarray) -> np.ndarray:
    """Grow higher class ids one pixel across class boundaries."""
    pad = np.pad(semantic, 1, mode="edge")
    return sliding_window_view(pad, (3, 3)).max(axis=(-1, -2))


def _make_frames(config: StrategyConfig, n_scenes: int, scene_seed_offset: int,
                 autolabeled: bool) -> list[Frame]:
    sensor = SensorConfig(columns=config.columns)
    calib = default_calibration(width=config.camera_width, height=config.camera_height)
    rev = sensor.revolution_us
    frames = []
    for s in range(n_scenes):
        scene_rng = np.random.default_rng((config.seed, scene_seed_offset + s))
        scene = random_scene(scene_rng)
        span = config.frames_per_scene * rev
        track = straight_track(config.speed_mps, -rev, span + rev)
        for i in range(config.frames_per_scene):
            rng = np.random.default_rng((config.seed, scene_seed_offset + s, i))
            rev_start = i * rev
            scan, gt = render_scan(scene, track, rev_start, sensor, calib.lidar_to_vehicle, rng)
            gt_scan = ground_truth_scan(scan, gt)
            image = scan_to_image(scan)
            frame = Frame(input=network_input(image), gt=label_grid(image, gt_scan), auto=None)
            if autolabeled:
                semantic = render_camera(scene, track, rev_start, calib, sensor.max_range_m)
                if rng.random() < config.bleed_probability:
                    semantic = _bleed_boundaries(semantic)
                noisy_calib = _jittered_calibration(calib, rng, config.jitter_rot_rad,
                                                    config.jitter_trans_m)
                bundle = FrameBundle(scan=scan, semantic_image=semantic, t_c_us=rev_start,
                                     calibration=noisy_calib, odometry=track)
                labeled = autolabel_frame(bundle)
                frame.auto = label_grid(image, labeled)
            frames.append(frame)
    return frames


def _mean_iou(net: LiLaNet, frames: list[Frame]) -> float:
    cm = ConfusionMatrix()
    for f in frames:
        pred, _ = predict(net, f.input[None])
        cm.accumulate(pred[0], f.gt)
    return cm.mean_iou()


def run_strategies(config: StrategyConfig) -> dict[str, float]:
    """Train strategies 2, 4 and 5 for one seed; returns test mean IoU each."""
    train_frames = _make_frames(config, config.train_scenes, 0, autolabeled=True)
    test_frames = _make_frames(config, config.test_scenes, 1000, autolabeled=False)

    manual = select_keyframes(train_frames, config.manual_keyframes)
    manual_pairs = [(f.input, f.gt) for f in manual]
    auto_pairs = [(f.input, f.auto) for f in train_frames]

    results = {}

    net_manual = LiLaNet(widths=config.widths).initialize(config.seed)
    train(net_manual, manual_pairs, TrainConfig(
        iterations=config.manual_iterations, batch_size=config.batch_size, seed=config.seed))
    results["manual_small"] = _mean_iou(net_manual, test_frames)

    net_auto = LiLaNet(widths=config.widths).initialize(config.seed)
    train(net_auto, auto_pairs, TrainConfig(
        iterations=config.pretrain_iterations, batch_size=config.batch_size, seed=config.seed))
    results["autolabeled_full"] = _mean_iou(net_auto, test_frames)

    train(net_auto, manual_pairs, TrainConfig(
        learning_rate=FINETUNE_LR, iterations=config.finetune_iterations,
        batch_size=config.batch_size, seed=config.seed + 1))
    results["finetuned"] = _mean_iou(net_auto, test_frames)
    return results
