"""Ray-cast synthetic scenes: the ground-truth oracle for the pipeline.

A scene is a handful of labeled primitives (ground plane, axis-aligned
boxes, vertical cylinders). The scanner image is produced by casting one
ray per (ring, azimuth bin) from the interpolated sensor pose at that
firing's timestamp; the camera image by casting one ray per pixel from
the camera pose at exposure time. Both views therefore agree exactly on
the scene, which makes the transferred-label match rate measurable.

Reflectivity is a per-class constant plus seeded Gaussian noise, so the
network gets usable signal in both input channels. The constants are
free parameters of the generator, not measured values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autolabel import LabeledScan, Provenance
from .geometry import CalibrationSet, CameraIntrinsics, PoseTrack, RigidTransform, TimedPose
from .labels import UNLABELED, LidarClass
from .projection import (
    DEFAULT_COLUMNS,
    DEFAULT_RINGS,
    LidarScan,
    azimuth_of_column,
    default_elevation_table,
    direction_from_angles,
)

_EPS = 1e-6

CLASS_REFLECTIVITY = np.zeros(256, dtype=np.float64)
CLASS_REFLECTIVITY[LidarClass.ROAD] = 0.10
CLASS_REFLECTIVITY[LidarClass.SIDEWALK] = 0.20
CLASS_REFLECTIVITY[LidarClass.PERSON] = 0.35
CLASS_REFLECTIVITY[LidarClass.RIDER] = 0.40
CLASS_REFLECTIVITY[LidarClass.SMALL_VEHICLE] = 0.55
CLASS_REFLECTIVITY[LidarClass.LARGE_VEHICLE] = 0.50
CLASS_REFLECTIVITY[LidarClass.TWO_WHEELER] = 0.45
CLASS_REFLECTIVITY[LidarClass.CONSTRUCTION] = 0.30
CLASS_REFLECTIVITY[LidarClass.POLE] = 0.60
CLASS_REFLECTIVITY[LidarClass.TRAFFIC_SIGN] = 0.90
CLASS_REFLECTIVITY[LidarClass.VEGETATION] = 0.25
CLASS_REFLECTIVITY[LidarClass.TERRAIN] = 0.15


@dataclass(frozen=True)
class GroundPlane:
    z: float
    label: int = LidarClass.ROAD

    def intersect(self, origins, dirs):
        dz = dirs[:, 2]
        hit = np.abs(dz) > _EPS
        t = np.where(hit, (self.z - origins[:, 2]) / np.where(hit, dz, 1.0), np.inf)
        hit &= t > _EPS
        return np.where(hit, t, np.inf)


@dataclass(frozen=True)
class Box:
    min_corner: tuple
    max_corner: tuple
    label: int

    def intersect(self, origins, dirs):
        lo = np.asarray(self.min_corner, dtype=np.float64)
        hi = np.asarray(self.max_corner, dtype=np.float64)
        t_near = np.full(len(origins), -np.inf)
        t_far = np.full(len(origins), np.inf)
        for axis in range(3):
            o, d = origins[:, axis], dirs[:, axis]
            parallel = np.abs(d) <= _EPS
            inside = (o >= lo[axis]) & (o <= hi[axis])
            dsafe = np.where(parallel, 1.0, d)
            t1 = np.where(parallel, np.where(inside, -np.inf, np.inf), (lo[axis] - o) / dsafe)
            t2 = np.where(parallel, np.where(inside, np.inf, -np.inf), (hi[axis] - o) / dsafe)
            t_near = np.maximum(t_near, np.minimum(t1, t2))
            t_far = np.minimum(t_far, np.maximum(t1, t2))
        t = np.where(t_near > _EPS, t_near, t_far)
        hit = (t_near <= t_far) & (t > _EPS)
        return np.where(hit, t, np.inf)


@dataclass(frozen=True)
class VerticalCylinder:
    cx: float
    cy: float
    radius: float
    z_min: float
    z_max: float
    label: int

    def intersect(self, origins, dirs):
        ox = origins[:, 0] - self.cx
        oy = origins[:, 1] - self.cy
        dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]
        a = dx * dx + dy * dy
        b = 2.0 * (ox * dx + oy * dy)
        c = ox * ox + oy * oy - self.radius * self.radius
        disc = b * b - 4.0 * a * c
        solvable = (a > _EPS) & (disc >= 0.0)
        sq = np.sqrt(np.where(solvable, disc, 0.0))
        asafe = np.where(solvable, a, 1.0)
        best = np.full(len(origins), np.inf)
        for root in ((-b - sq) / (2.0 * asafe), (-b + sq) / (2.0 * asafe)):
            z = origins[:, 2] + root * dz
            ok = solvable & (root > _EPS) & (z >= self.z_min) & (z <= self.z_max)
            best = np.where(ok & (root < best), root, best)
        return best


@dataclass
class SyntheticScene:
    primitives: list = field(default_factory=list)

    def raycast(self, origins: np.ndarray, dirs: np.ndarray, max_range: float):
        """Nearest-hit distance and class per unit-direction ray.

        Returns (distance, label); misses (including hits beyond
        max_range) get distance +inf and the unlabeled id.
        """
        origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
        dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
        best = np.full(len(origins), np.inf)
        labels = np.full(len(origins), UNLABELED, dtype=np.uint8)
        for prim in self.primitives:
            t = prim.intersect(origins, dirs)
            closer = t < best
            best = np.where(closer, t, best)
            labels[closer] = prim.label
        miss = best > max_range
        best[miss] = np.inf
        labels[miss] = UNLABELED
        return best, labels


@dataclass
class SensorConfig:
    rings: int = DEFAULT_RINGS
    columns: int = DEFAULT_COLUMNS
    revolution_us: int = 100_000
    max_range_m: float = 100.0
    reflectivity_noise: float = 0.02
    elevations: np.ndarray | None = None

    def elevation_table(self) -> np.ndarray:
        return default_elevation_table(self.rings) if self.elevations is None else self.elevations


# Camera frame: x right, y down, z forward; vehicle frame: x forward, y left, z up.
CAMERA_TO_VEHICLE_ROTATION = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])


def default_calibration(width: int = 400, height: int = 120, hfov_deg: float = 90.0,
                        shutter_interval_us: int = 0) -> CalibrationSet:
    """Forward-looking camera mounted just below the roof scanner."""
    fx = (width / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)
    intr = CameraIntrinsics(
        fx=fx, fy=fx, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        width=width, height=height, shutter_interval_us=shutter_interval_us,
    )
    return CalibrationSet(
        lidar_to_vehicle=RigidTransform.from_translation(0.0, 0.0, 2.0),
        camera_to_vehicle=RigidTransform(CAMERA_TO_VEHICLE_ROTATION, np.array([0.1, 0.0, 1.9])),
        intrinsics=intr,
    )


def straight_track(speed_mps: float, t_start_us: int, t_end_us: int,
                   sample_us: int = 20_000, z: float = 0.0) -> PoseTrack:
    """Constant-velocity drive along +x, sampled like a wheel-odometry log."""
    times = list(range(t_start_us, t_end_us + sample_us, sample_us))
    poses = [
        TimedPose(t, RigidTransform.from_translation(speed_mps * (t - t_start_us) * 1e-6, 0.0, z))
        for t in times
    ]
    return PoseTrack(poses)


def firing_times(rev_start_us: int, sensor: SensorConfig) -> np.ndarray:
    """Per-azimuth-bin firing timestamps, linear in azimuth over the revolution."""
    k = np.arange(sensor.columns)
    return rev_start_us + ((k + 0.5) * sensor.revolution_us / sensor.columns).astype(np.int64)


def render_scan(scene: SyntheticScene, track: PoseTrack, rev_start_us: int,
                sensor: SensorConfig, lidar_to_vehicle: RigidTransform,
                rng: np.random.Generator):
    """Simulate one revolution from a moving sensor.

    Returns (LidarScan, ground-truth labels); misses become invalid
    returns (range 0) labeled UNLABELED. Points are emitted in firing
    order: azimuth bin by azimuth bin, all rings per bin.
    """
    elev = sensor.elevation_table()
    times = firing_times(rev_start_us, sensor)
    az_bins = (np.arange(sensor.columns) + 0.5) * (2.0 * math.pi / sensor.columns)

    n = sensor.columns * sensor.rings
    origins = np.empty((n, 3))
    dirs = np.empty((n, 3))
    local = direction_from_angles(az_bins[:, None], elev[None, :])  # (C, R, 3)
    for k in range(sensor.columns):
        pose = track.pose_at(int(times[k])) @ lidar_to_vehicle
        sl = slice(k * sensor.rings, (k + 1) * sensor.rings)
        origins[sl] = pose.translation
        dirs[sl] = local[k] @ pose.rotation.T

    dist, gt_labels = scene.raycast(origins, dirs, sensor.max_range_m)
    valid = np.isfinite(dist)

    range_m = np.where(valid, dist, 0.0).astype(np.float32)
    refl = CLASS_REFLECTIVITY[gt_labels] + rng.normal(0.0, sensor.reflectivity_noise, n)
    refl = np.where(valid, np.clip(refl, 0.0, 1.0), 0.0).astype(np.float32)

    scan = LidarScan(
        ring=np.tile(np.arange(sensor.rings, dtype=np.uint16), sensor.columns),
        azimuth=np.repeat(az_bins, sensor.rings).astype(np.float32),
        range_m=range_m,
        reflectivity=refl,
        time_us=np.repeat(times, sensor.rings),
        rings=sensor.rings,
        columns=sensor.columns,
        revolution_start_us=rev_start_us,
    )
    gt_labels = np.where(valid, gt_labels, UNLABELED).astype(np.uint8)
    return scan, gt_labels


def render_camera(scene: SyntheticScene, track: PoseTrack, t_exposure_us: int,
                  calib: CalibrationSet, max_range: float = 100.0) -> np.ndarray:
    """Per-pixel semantic image from the camera pose at exposure time.

    Rays go through pixel centers; rays that escape the scene see sky.
    """
    intr = calib.intrinsics
    cam_pose = track.pose_at(t_exposure_us) @ calib.camera_to_vehicle
    u = np.arange(intr.width, dtype=np.float64)
    v = np.arange(intr.height, dtype=np.float64)
    du = (u[None, :] - intr.cx) / intr.fx
    dv = (v[:, None] - intr.cy) / intr.fy
    d_cam = np.stack([np.broadcast_to(du, (intr.height, intr.width)),
                      np.broadcast_to(dv, (intr.height, intr.width)),
                      np.ones((intr.height, intr.width))], axis=-1)
    d_cam /= np.linalg.norm(d_cam, axis=-1, keepdims=True)
    dirs = d_cam.reshape(-1, 3) @ cam_pose.rotation.T
    origins = np.broadcast_to(cam_pose.translation, dirs.shape)

    _, labels = scene.raycast(origins, dirs, max_range)
    labels = labels.reshape(intr.height, intr.width)
    return np.where(labels == UNLABELED, np.uint8(LidarClass.SKY), labels)


def ground_truth_scan(scan: LidarScan, gt_labels: np.ndarray) -> LabeledScan:
    """Wrap ray-cast labels as a LabeledScan (invalid returns flagged)."""
    provenance = np.where(scan.valid_mask, Provenance.TRANSFERRED, Provenance.INVALID).astype(np.uint8)
    return LabeledScan(scan=scan, labels=gt_labels, provenance=provenance)


def example_scene() -> SyntheticScene:
    """Fixed road scene: ground plane, three boxes, two cylinders."""
    return SyntheticScene(
        primitives=[
            GroundPlane(z=0.0, label=LidarClass.ROAD),
            Box((4.0, -8.0, 0.0), (30.0, -4.5, 0.05), label=LidarClass.SIDEWALK),
            Box((10.0, 3.0, 0.0), (14.5, 5.0, 1.6), label=LidarClass.SMALL_VEHICLE),
            Box((18.0, -2.5, 0.0), (26.0, 0.5, 3.4), label=LidarClass.LARGE_VEHICLE),
            Box((28.0, 6.0, 0.0), (34.0, 14.0, 7.0), label=LidarClass.CONSTRUCTION),
            VerticalCylinder(16.0, -6.0, 0.18, 0.0, 5.0, label=LidarClass.POLE),
            VerticalCylinder(24.0, 8.0, 1.1, 0.0, 6.0, label=LidarClass.VEGETATION),
        ]
    )


def random_scene(rng: np.random.Generator) -> SyntheticScene:
    """Randomized road scene with the same primitive mix as example_scene."""
    prims = [GroundPlane(z=0.0, label=LidarClass.ROAD)]
    side = rng.choice([-1.0, 1.0])
    y0 = side * rng.uniform(4.0, 7.0)
    prims.append(Box((rng.uniform(2.0, 6.0), min(y0, y0 + side * 3.0), 0.0),
                     (rng.uniform(24.0, 34.0), max(y0, y0 + side * 3.0), 0.05),
                     label=int(rng.choice([LidarClass.SIDEWALK, LidarClass.TERRAIN]))))
    for label in (LidarClass.SMALL_VEHICLE, LidarClass.LARGE_VEHICLE, LidarClass.CONSTRUCTION):
        x = rng.uniform(8.0, 30.0)
        y = rng.uniform(-10.0, 10.0)
        w = rng.uniform(2.0, 5.0) if label != LidarClass.CONSTRUCTION else rng.uniform(5.0, 9.0)
        d = rng.uniform(1.6, 3.0) if label != LidarClass.CONSTRUCTION else rng.uniform(5.0, 9.0)
        h = {LidarClass.SMALL_VEHICLE: 1.6, LidarClass.LARGE_VEHICLE: 3.4, LidarClass.CONSTRUCTION: 7.0}[label]
        prims.append(Box((x, y, 0.0), (x + w, y + d, h * rng.uniform(0.9, 1.1)), label=int(label)))
    for label, radius, height in ((LidarClass.POLE, 0.18, 5.0), (LidarClass.VEGETATION, 1.1, 6.0)):
        prims.append(VerticalCylinder(rng.uniform(8.0, 30.0), rng.uniform(-12.0, 12.0),
                                      radius, 0.0, height * rng.uniform(0.8, 1.2), label=int(label)))
    return SyntheticScene(primitives=prims)
