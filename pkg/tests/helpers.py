"""Shared test utilities: random transforms/scans and independent oracles."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from lidarseg.geometry import RigidTransform, ego_motion_correct, pinhole_project_many
from lidarseg.projection import LidarScan, scan_to_xyz, default_elevation_table


def random_rigid_transform(rng, trans_scale=5.0):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return RigidTransform.from_quaternion(q, rng.uniform(-trans_scale, trans_scale, 3))


def random_scan(rng, rings=32, columns=1800, n_points=None, max_points=400):
    """Random scan with at most one point per (ring, column) cell."""
    if n_points is None:
        n_points = int(rng.integers(0, max_points))
    cells = rng.choice(rings * columns, size=n_points, replace=False)
    rows, cols = np.divmod(cells, columns)
    bin_width = 2.0 * np.pi / columns
    # Azimuth strictly inside the chosen bin so binning is unambiguous.
    az_bin = (columns // 2 - cols) % columns
    azimuth = ((az_bin + rng.uniform(0.05, 0.95, n_points)) * bin_width).astype(np.float32)
    return LidarScan(
        ring=rows.astype(np.uint16),
        azimuth=azimuth,
        range_m=rng.uniform(0.5, 80.0, n_points).astype(np.float32),
        reflectivity=rng.uniform(0.0, 1.0, n_points).astype(np.float32),
        time_us=rng.integers(0, 100_000, n_points),
        rings=rings,
        columns=columns,
    )


def interior_mask(label_image):
    """True where the full 3x3 neighborhood shares the pixel's class."""
    pad = np.pad(label_image, 1, mode="edge")
    win = sliding_window_view(pad, (3, 3))
    return (win == label_image[..., None, None]).all(axis=(-1, -2))


def reproject_pixels(scan, indices, calib, track, t_c_us, elevations=None):
    """Rounded camera pixels of selected points, via the public geometry ops."""
    if elevations is None:
        elevations = default_elevation_table(scan.rings)
    t_c_eff = t_c_us + calib.intrinsics.shutter_interval_us // 2
    p_v = calib.lidar_to_vehicle.apply(scan_to_xyz(scan, elevations)[indices])
    p_tc = np.empty_like(p_v)
    times = scan.time_us[indices]
    for t_p in np.unique(times):
        motion = track.relative_motion(t_c_eff, int(t_p))
        sel = times == t_p
        p_tc[sel] = ego_motion_correct(p_v[sel], motion)
    p_cam = calib.camera_to_vehicle.inverse().apply(p_tc)
    uv, ok = pinhole_project_many(calib.intrinsics, p_cam)
    ui = np.clip(np.rint(uv[:, 0]).astype(np.int64), 0, calib.intrinsics.width - 1)
    vi = np.clip(np.rint(uv[:, 1]).astype(np.int64), 0, calib.intrinsics.height - 1)
    return ui, vi, ok
