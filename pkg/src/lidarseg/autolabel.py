"""Cross-modal training-data generation.

Each valid scan point is moved into the vehicle frame, ego-motion
corrected from its firing time to the (shutter-centered) camera exposure
time, projected into the reference camera, and given the semantic label
of the pixel it lands on. Points that never reach a pixel keep the
unlabeled id and record why in a per-point provenance flag.

Frames where the scanner was pointing far away from the camera axis at
exposure time suffer timing-induced occlusion artifacts; those are
dropped by the heading-deviation filter before autolabeling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from .geometry import CalibrationSet, PoseTrack, ego_motion_correct, pinhole_project_many, wrap_angle
from .labels import UNLABELED
from .projection import LidarScan, default_elevation_table, scan_to_xyz

DEFAULT_GAMMA_H = math.radians(60.0)
DEFAULT_EPS_OCC = 0.5


class CalibrationMismatchError(ValueError):
    """Semantic image dimensions disagree with the camera intrinsics."""


class Provenance(IntEnum):
    TRANSFERRED = 0
    OUT_OF_VIEW = 1
    OCCLUDED = 2
    INVALID = 3


@dataclass
class LabeledScan:
    """A scan plus per-point class labels and label provenance."""

    scan: LidarScan
    labels: np.ndarray
    provenance: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        self.provenance = np.asarray(self.provenance, dtype=np.uint8)
        n = len(self.scan)
        if len(self.labels) != n or len(self.provenance) != n:
            raise ValueError("labels/provenance must have one entry per point")
        untransferred = self.provenance != Provenance.TRANSFERRED
        if (self.labels[untransferred] != UNLABELED).any():
            raise ValueError("only transferred points may carry a label")

    def provenance_counts(self) -> dict[str, int]:
        counts = np.bincount(self.provenance, minlength=len(Provenance))
        return {p.name: int(counts[p.value]) for p in Provenance}


@dataclass
class FrameBundle:
    """Everything needed to autolabel one scan against one camera image."""

    scan: LidarScan
    semantic_image: np.ndarray
    t_c_us: int
    calibration: CalibrationSet
    odometry: PoseTrack


def occlusion_filter(uv: np.ndarray, z_cam: np.ndarray, eps_occ: float = DEFAULT_EPS_OCC) -> np.ndarray:
    """Flag points hidden behind a nearer point in the same pixel.

    Points are bucketed by their rounded pixel; within a bucket anything
    more than eps_occ meters behind the nearest point is occluded. The
    result depends only on the (u, v, z) multiset, not on point order.
    """
    uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
    z = np.asarray(z_cam, dtype=np.float64)
    if len(z) == 0:
        return np.zeros(0, dtype=bool)
    ui = np.rint(uv[:, 0]).astype(np.int64)
    vi = np.rint(uv[:, 1]).astype(np.int64)
    key = (vi << 32) | (ui & 0xFFFFFFFF)
    uniq, inverse = np.unique(key, return_inverse=True)
    z_min = np.full(len(uniq), np.inf)
    np.minimum.at(z_min, inverse, z)
    return z > z_min[inverse] + eps_occ


def heading_ok(alpha_c: float, alpha_h: float, gamma_h: float = DEFAULT_GAMMA_H) -> bool:
    """True when the scanner azimuth sits inside the camera heading window.

    gamma_h is the total window width, so the allowed deviation from the
    camera principal axis is +/- gamma_h / 2.
    """
    return abs(wrap_angle(alpha_h - alpha_c)) <= gamma_h / 2.0


def filter_frames(frames: Sequence, alpha_c, alpha_h, gamma_h: float = DEFAULT_GAMMA_H) -> list:
    """Keep the frames whose (alpha_c, alpha_h) pass heading_ok, order preserved."""
    alpha_c = np.broadcast_to(np.asarray(alpha_c, dtype=np.float64), (len(frames),))
    alpha_h = np.asarray(alpha_h, dtype=np.float64)
    if len(alpha_h) != len(frames):
        raise ValueError("one heading pair per frame required")
    return [f for f, ac, ah in zip(frames, alpha_c, alpha_h) if heading_ok(ac, ah, gamma_h)]


def scan_heading_at(scan: LidarScan, t_us: int) -> float:
    """Scanner azimuth at a given time, interpolated linearly within the sweep."""
    if len(scan) == 0:
        raise ValueError("cannot interpolate the heading of an empty scan")
    order = np.argsort(scan.time_us, kind="stable")
    times = scan.time_us[order].astype(np.float64)
    az = np.unwrap(scan.azimuth[order].astype(np.float64))
    return float(np.interp(float(t_us), times, az)) % (2.0 * math.pi)


def autolabel_frame(
    bundle: FrameBundle,
    elevations: np.ndarray | None = None,
    eps_occ: float = DEFAULT_EPS_OCC,
    correct_ego_motion: bool = True,
) -> LabeledScan:
    """Transfer camera-image labels onto the points of one scan.

    Invalid returns are flagged INVALID; points whose firing time falls
    outside the odometry span are flagged INVALID as well rather than
    failing the frame. The exposure time is shifted by half the shutter
    interval to the image center before the motion lookup.
    """
    scan = bundle.scan
    calib = bundle.calibration
    intr = calib.intrinsics
    if bundle.semantic_image.shape != (intr.height, intr.width):
        raise CalibrationMismatchError(
            f"semantic image is {bundle.semantic_image.shape}, intrinsics say "
            f"{(intr.height, intr.width)}"
        )
    if elevations is None:
        elevations = default_elevation_table(scan.rings)

    labels = np.full(len(scan), UNLABELED, dtype=np.uint8)
    provenance = np.full(len(scan), Provenance.INVALID, dtype=np.uint8)

    usable = scan.valid_mask.copy()
    t_c_eff = bundle.t_c_us + intr.shutter_interval_us // 2
    if correct_ego_motion:
        track = bundle.odometry
        usable &= (scan.time_us >= track.start_us) & (scan.time_us <= track.end_us)
    idx = np.nonzero(usable)[0]
    if idx.size == 0:
        return LabeledScan(scan=scan, labels=labels, provenance=provenance)

    p_v = calib.lidar_to_vehicle.apply(scan_to_xyz(scan, elevations)[idx])

    if correct_ego_motion:
        p_tc = np.empty_like(p_v)
        times = scan.time_us[idx]
        # Points fired in the same instant share one correcting transform.
        for t_p in np.unique(times):
            motion = bundle.odometry.relative_motion(t_c_eff, int(t_p))
            sel = times == t_p
            p_tc[sel] = ego_motion_correct(p_v[sel], motion)
    else:
        p_tc = p_v

    p_cam = calib.camera_to_vehicle.inverse().apply(p_tc)
    uv, in_view = pinhole_project_many(intr, p_cam)

    provenance[idx] = Provenance.OUT_OF_VIEW
    vis = np.nonzero(in_view)[0]
    if vis.size:
        occluded = occlusion_filter(uv[vis], p_cam[vis, 2], eps_occ)
        provenance[idx[vis[occluded]]] = Provenance.OCCLUDED
        hit = vis[~occluded]
        ui = np.clip(np.rint(uv[hit, 0]).astype(np.int64), 0, intr.width - 1)
        vi = np.clip(np.rint(uv[hit, 1]).astype(np.int64), 0, intr.height - 1)
        labels[idx[hit]] = bundle.semantic_image[vi, ui]
        provenance[idx[hit]] = Provenance.TRANSFERRED

    return LabeledScan(scan=scan, labels=labels, provenance=provenance)
