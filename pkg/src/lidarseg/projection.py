"""Cylindrical projection of rotating-scanner returns.

A full revolution of a multi-ring scanner becomes a rings x columns image
with a depth and a reflectivity channel. Row = ring index (row 0 is the
highest beam). Column 0 is the rear seam; azimuth 0 (vehicle forward, x
axis) maps to the center column and azimuth increases counterclockwise
toward lower column indices, so the image sweeps the horizon left to
right as seen from the sensor. The projection is lossless up to azimuth
quantization at bin centers: every stored range/reflectivity survives a
round trip bit-exactly.

Ranges are float32 with 0.0 marking an invalid return (no echo).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi

INVALID_RANGE = np.float32(0.0)

DEFAULT_RINGS = 32
DEFAULT_COLUMNS = 1800


def default_elevation_table(rings: int = DEFAULT_RINGS) -> np.ndarray:
    """Per-ring elevation angles (radians), +15 deg down to -25 deg."""
    return np.deg2rad(np.linspace(15.0, -25.0, rings))


@dataclass
class LidarScan:
    """One revolution of returns, stored column-wise as parallel arrays."""

    ring: np.ndarray
    azimuth: np.ndarray
    range_m: np.ndarray
    reflectivity: np.ndarray
    time_us: np.ndarray
    rings: int = DEFAULT_RINGS
    columns: int = DEFAULT_COLUMNS
    revolution_start_us: int = 0

    def __post_init__(self):
        self.ring = np.asarray(self.ring, dtype=np.uint16)
        self.azimuth = np.asarray(self.azimuth, dtype=np.float32)
        self.range_m = np.asarray(self.range_m, dtype=np.float32)
        self.reflectivity = np.asarray(self.reflectivity, dtype=np.float32)
        self.time_us = np.asarray(self.time_us, dtype=np.int64)
        n = len(self.ring)
        for name in ("azimuth", "range_m", "reflectivity", "time_us"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length differs from ring length {n}")
        if n and int(self.ring.max()) >= self.rings:
            raise ValueError("ring index out of range")
        az = self.azimuth.astype(np.float64)
        if n and not ((az >= 0.0) & (az < TWO_PI)).all():
            raise ValueError("azimuth must lie in [0, 2*pi)")
        refl = self.reflectivity
        if n and not ((refl >= 0.0) & (refl <= 1.0)).all():
            raise ValueError("reflectivity must lie in [0, 1]")

    def __len__(self):
        return len(self.ring)

    @property
    def valid_mask(self) -> np.ndarray:
        return self.range_m > 0.0


@dataclass
class LidarImage:
    """Cylindrical depth/reflectivity image with validity and provenance grids.

    point_index maps each valid cell back to the index of the scan point
    that produced it (-1 where invalid); time_us carries that point's
    firing time.
    """

    depth: np.ndarray
    reflectivity: np.ndarray
    valid: np.ndarray
    time_us: np.ndarray
    point_index: np.ndarray = field(default=None)
    revolution_start_us: int = 0

    def __post_init__(self):
        if self.point_index is None:
            self.point_index = np.where(self.valid, 0, -1).astype(np.int32)
        shapes = {a.shape for a in (self.depth, self.reflectivity, self.valid, self.time_us, self.point_index)}
        if len(shapes) != 1:
            raise ValueError("image channels must share one shape")
        invalid = ~self.valid
        if (self.depth[invalid] != 0).any() or (self.reflectivity[invalid] != 0).any():
            raise ValueError("invalid cells must store zero depth and reflectivity")
        if (self.depth[self.valid] <= 0).any():
            raise ValueError("valid cells must store positive depth")

    @property
    def rings(self) -> int:
        return self.depth.shape[0]

    @property
    def columns(self) -> int:
        return self.depth.shape[1]


def column_of_azimuth(azimuth, columns: int = DEFAULT_COLUMNS):
    """Image column for an azimuth in [0, 2*pi); vectorized.

    Forward (azimuth 0) lands on the center column; counterclockwise
    azimuths move left in the image (toward column 0 at the rear seam).
    """
    az = np.asarray(azimuth, dtype=np.float64)
    k = np.minimum(np.floor(az / TWO_PI * columns).astype(np.int64), columns - 1)
    return (columns // 2 - k) % columns


def azimuth_of_column(col, columns: int = DEFAULT_COLUMNS):
    """Bin-center azimuth of an image column (inverse of column_of_azimuth)."""
    k = (columns // 2 - np.asarray(col, dtype=np.int64)) % columns
    return (k + 0.5) * (TWO_PI / columns)


def cell_of(ring: int, azimuth: float, columns: int = DEFAULT_COLUMNS) -> tuple[int, int]:
    """(row, col) image cell of a single return."""
    return int(ring), int(column_of_azimuth(azimuth, columns))


def scan_to_image(scan: LidarScan) -> LidarImage:
    """Bin a scan into its cylindrical image; nearest range wins a cell."""
    shape = (scan.rings, scan.columns)
    depth = np.zeros(shape, dtype=np.float32)
    refl = np.zeros(shape, dtype=np.float32)
    valid = np.zeros(shape, dtype=bool)
    time_us = np.zeros(shape, dtype=np.int64)
    point_index = np.full(shape, -1, dtype=np.int32)

    keep = scan.valid_mask
    idx = np.nonzero(keep)[0]
    if idx.size:
        rows = scan.ring[idx].astype(np.int64)
        cols = column_of_azimuth(scan.azimuth[idx], scan.columns)
        # Write farthest first so the nearest return in a cell lands last.
        order = np.argsort(-scan.range_m[idx], kind="stable")
        rows, cols, idx = rows[order], cols[order], idx[order]
        depth[rows, cols] = scan.range_m[idx]
        refl[rows, cols] = scan.reflectivity[idx]
        time_us[rows, cols] = scan.time_us[idx]
        point_index[rows, cols] = idx.astype(np.int32)
        valid[rows, cols] = True

    return LidarImage(depth, refl, valid, time_us, point_index, scan.revolution_start_us)


def image_to_scan(image: LidarImage) -> LidarScan:
    """Emit one point per valid cell, azimuth quantized to the bin center.

    Ranges and reflectivities are reproduced bit-exactly, so
    scan_to_image(image_to_scan(img)) is the identity on images.
    """
    rows, cols = np.nonzero(image.valid)
    azimuth = azimuth_of_column(cols, image.columns).astype(np.float32)
    return LidarScan(
        ring=rows.astype(np.uint16),
        azimuth=azimuth,
        range_m=image.depth[rows, cols],
        reflectivity=image.reflectivity[rows, cols],
        time_us=image.time_us[rows, cols],
        rings=image.rings,
        columns=image.columns,
        revolution_start_us=image.revolution_start_us,
    )


def direction_from_angles(azimuth, elevation) -> np.ndarray:
    """Unit ray direction(s) for azimuth/elevation angles; (..., 3)."""
    az, el = np.broadcast_arrays(
        np.asarray(azimuth, dtype=np.float64), np.asarray(elevation, dtype=np.float64)
    )
    ce = np.cos(el)
    return np.stack([ce * np.cos(az), ce * np.sin(az), np.sin(el)], axis=-1)


def cell_to_xyz(row, col, range_m, elevations: np.ndarray, columns: int = DEFAULT_COLUMNS) -> np.ndarray:
    """Sensor-frame Cartesian point(s) of image cell(s) at given range(s)."""
    az = azimuth_of_column(col, columns)
    el = np.asarray(elevations, dtype=np.float64)[np.asarray(row, dtype=np.int64)]
    r = np.asarray(range_m, dtype=np.float64)
    return r[..., None] * direction_from_angles(az, el)


def scan_to_xyz(scan: LidarScan, elevations: np.ndarray) -> np.ndarray:
    """(N, 3) sensor-frame coordinates of every return (invalid ones at 0)."""
    el = np.asarray(elevations, dtype=np.float64)[scan.ring.astype(np.int64)]
    dirs = direction_from_angles(scan.azimuth.astype(np.float64), el)
    return dirs * scan.range_m.astype(np.float64)[:, None]


def image_to_cloud(image: LidarImage, elevations: np.ndarray) -> np.ndarray:
    """(N, 3) point cloud of the valid cells, rays through bin centers."""
    return scan_to_xyz(image_to_scan(image), elevations)
