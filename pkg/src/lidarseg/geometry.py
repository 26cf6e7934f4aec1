"""Rigid-body transforms, pose-track interpolation and pinhole projection.

All rotations are stored as 3x3 orthonormal matrices; quaternions appear
only at file I/O boundaries (pose logs use x, y, z, w order). Timestamps
are integer microseconds throughout, so timing arithmetic is bit-exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ROTATION_TOL = 1e-9


class TrackRangeError(ValueError):
    """Requested timestamp lies outside the span of a pose track."""


def wrap_angle(a):
    """Wrap an angle (radians) into (-pi, pi]."""
    return math.pi - (math.pi - a) % (2.0 * math.pi)


def delta_t_us(t_c: int, t_p: int, t_r_us: int = 0) -> int:
    """Time offset between a camera exposure and a point measurement.

    Returns t_c - t_p + t_r/2 in integer microseconds; the half shutter
    interval moves the camera reference to the image center. t_r must be
    non-negative, so the halving truncates toward zero.
    """
    return int(t_c) - int(t_p) + int(t_r_us) // 2


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) transform: apply(p) = rotation @ p + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        err = np.abs(r.T @ r - np.eye(3)).max()
        if err >= ROTATION_TOL or np.linalg.det(r) <= 0.0:
            raise ValueError(f"rotation is not orthonormal (error {err:.3e})")
        if not (np.isfinite(r).all() and np.isfinite(t).all()):
            raise ValueError("transform contains non-finite values")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    @staticmethod
    def from_translation(x, y, z) -> "RigidTransform":
        return RigidTransform(np.eye(3), np.array([x, y, z], dtype=np.float64))

    @staticmethod
    def from_rotation_z(angle: float) -> "RigidTransform":
        c, s = math.cos(angle), math.sin(angle)
        return RigidTransform(np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]), np.zeros(3))

    @staticmethod
    def from_matrix(m: np.ndarray) -> "RigidTransform":
        m = np.asarray(m, dtype=np.float64).reshape(4, 4)
        return RigidTransform(m[:3, :3], m[:3, 3])

    def to_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def from_quaternion(q: np.ndarray, translation: np.ndarray) -> "RigidTransform":
        return RigidTransform(matrix_from_quaternion(q), np.asarray(translation, dtype=np.float64))

    def to_quaternion(self) -> np.ndarray:
        return quaternion_from_matrix(self.rotation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Transform applying `other` first, then `self`."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply to a single (3,) point or an (N, 3) array of points."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation


def ego_motion_correct(points: np.ndarray, motion: RigidTransform) -> np.ndarray:
    """Map points measured before/after an exposure into the exposure-time frame.

    `motion` is the vehicle motion between measurement and exposure time
    (the pose at exposure time expressed in the measurement-time frame);
    the correction applies its inverse.
    """
    return motion.inverse().apply(points)


def quaternion_from_matrix(r: np.ndarray) -> np.ndarray:
    """Unit quaternion (x, y, z, w) for a rotation matrix."""
    r = np.asarray(r, dtype=np.float64)
    tr = r[0, 0] + r[1, 1] + r[2, 2]
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array([(r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s, 0.25 * s])
    elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array([0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s, (r[2, 1] - r[1, 2]) / s])
    elif r[1, 1] >= r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q = np.array([(r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s, (r[0, 2] - r[2, 0]) / s])
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q = np.array([(r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s, (r[1, 0] - r[0, 1]) / s])
    return q / np.linalg.norm(q)


def matrix_from_quaternion(q: np.ndarray) -> np.ndarray:
    """Rotation matrix for a quaternion (x, y, z, w); normalizes the input."""
    x, y, z, w = np.asarray(q, dtype=np.float64) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def quaternion_slerp(q0: np.ndarray, q1: np.ndarray, u: float) -> np.ndarray:
    """Spherical-linear interpolation along the shorter arc, u in [0, 1]."""
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    d = float(np.dot(q0, q1))
    if d < 0.0:
        q1 = -q1
        d = -d
    if d > 1.0 - 1e-12:
        q = (1.0 - u) * q0 + u * q1
    else:
        theta = math.acos(min(d, 1.0))
        s = math.sin(theta)
        q = math.sin((1.0 - u) * theta) / s * q0 + math.sin(u * theta) / s * q1
    return q / np.linalg.norm(q)


@dataclass(frozen=True)
class TimedPose:
    time_us: int
    pose: RigidTransform


class PoseTrack:
    """Time-ordered vehicle-in-world poses with interpolated lookup.

    Between samples the translation is interpolated linearly and the
    rotation by quaternion slerp. Lookups outside the sampled span raise
    TrackRangeError.
    """

    def __init__(self, poses: list[TimedPose]):
        if len(poses) < 2:
            raise ValueError("a pose track needs at least two samples")
        self.times = np.array([p.time_us for p in poses], dtype=np.int64)
        if not (np.diff(self.times) > 0).all():
            raise ValueError("pose timestamps must be strictly increasing")
        self.translations = np.stack([p.pose.translation for p in poses])
        self.quaternions = np.stack([p.pose.to_quaternion() for p in poses])

    def __len__(self):
        return len(self.times)

    @property
    def start_us(self) -> int:
        return int(self.times[0])

    @property
    def end_us(self) -> int:
        return int(self.times[-1])

    def covers(self, t_us: int) -> bool:
        return self.start_us <= t_us <= self.end_us

    def pose_at(self, t_us: int) -> RigidTransform:
        """Interpolated vehicle-in-world pose at an integer-microsecond time."""
        if not self.covers(t_us):
            raise TrackRangeError(
                f"timestamp {t_us} outside pose track span [{self.start_us}, {self.end_us}]"
            )
        i = int(np.searchsorted(self.times, t_us, side="right"))
        if i == len(self.times):
            i -= 1
        lo, hi = i - 1, i
        u = (t_us - self.times[lo]) / (self.times[hi] - self.times[lo])
        t = (1.0 - u) * self.translations[lo] + u * self.translations[hi]
        q = quaternion_slerp(self.quaternions[lo], self.quaternions[hi], float(u))
        return RigidTransform(matrix_from_quaternion(q), t)

    def relative_motion(self, t_from_us: int, t_to_us: int) -> RigidTransform:
        """Transform mapping t_from vehicle-frame coordinates into the t_to frame.

        Equals pose(t_to)^-1 o pose(t_from). For the scan correction this is
        called with t_from = exposure time and t_to = measurement time, so the
        result is the vehicle motion whose inverse moves a measured point into
        the exposure-time frame (see ego_motion_correct).
        """
        if t_from_us == t_to_us:
            self.pose_at(t_from_us)  # still range-checked
            return RigidTransform.identity()
        return self.pose_at(t_to_us).inverse() @ self.pose_at(t_from_us)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics; camera frame is x right, y down, z forward."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    shutter_interval_us: int = 0

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if self.shutter_interval_us < 0:
            raise ValueError("shutter interval must be non-negative")


def pinhole_project(intr: CameraIntrinsics, p_cam) -> tuple[float, float] | None:
    """Project one camera-frame point; None if behind the camera or off-image."""
    x, y, z = np.asarray(p_cam, dtype=np.float64)
    if z <= 0.0:
        return None
    u = intr.fx * x / z + intr.cx
    v = intr.fy * y / z + intr.cy
    if not (0.0 <= u < intr.width and 0.0 <= v < intr.height):
        return None
    return u, v


def pinhole_project_many(intr: CameraIntrinsics, pts: np.ndarray):
    """Vectorized pinhole projection.

    Args:
        pts: (N, 3) camera-frame points.

    Returns:
        uv: (N, 2) pixel coordinates (valid entries only are meaningful).
        valid: (N,) bool, True where z > 0 and (u, v) falls inside the image.
    """
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    z = pts[:, 2]
    in_front = z > 0.0
    zsafe = np.where(in_front, z, 1.0)
    u = intr.fx * pts[:, 0] / zsafe + intr.cx
    v = intr.fy * pts[:, 1] / zsafe + intr.cy
    valid = in_front & (u >= 0.0) & (u < intr.width) & (v >= 0.0) & (v < intr.height)
    return np.stack([u, v], axis=1), valid


@dataclass(frozen=True)
class CalibrationSet:
    """Sensor mounting transforms plus camera intrinsics."""

    lidar_to_vehicle: RigidTransform
    camera_to_vehicle: RigidTransform
    intrinsics: CameraIntrinsics

    def camera_axis_heading(self) -> float:
        """Azimuth of the camera principal axis in the vehicle frame."""
        fwd = self.camera_to_vehicle.rotation @ np.array([0.0, 0.0, 1.0])
        return math.atan2(fwd[1], fwd[0])
