"""On-disk formats. Everything is little-endian and round-trips bit-exactly.

    scan file        magic LLSC, u32 version, u32 count, u16 rings,
                     u16 columns, i64 revolution start (us); then per point
                     {u16 ring, f32 azimuth, f32 range, f32 reflectivity,
                     i64 timestamp} packed (22 bytes).
    labeled scan     magic LLLS, same header; per-point records carry two
                     trailing bytes {u8 label, u8 provenance}.
    depth/reflect.   PFM "Pf", scale -1.0 (little-endian), rows bottom-up.
    masks, labels    PGM P5 maxval 255; label visualizations PPM P6.
    calibration      text "key = value"; the two mounting transforms are
                     16 whitespace-separated reals (row-major 4x4).
    pose log         CSV rows timestamp_us,tx,ty,tz,qx,qy,qz,qw.
    manifest         JSON, see read_manifest.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autolabel import LabeledScan, Provenance
from .geometry import CalibrationSet, CameraIntrinsics, PoseTrack, RigidTransform, TimedPose
from .projection import LidarScan

SCAN_MAGIC = b"LLSC"
LABELED_MAGIC = b"LLLS"
SCAN_VERSION = 1

_HEADER = struct.Struct("<4sIIHHq")

_POINT_DTYPE = np.dtype(
    [("ring", "<u2"), ("azimuth", "<f4"), ("range", "<f4"), ("reflectivity", "<f4"), ("time", "<i8")]
)
_LABELED_DTYPE = np.dtype(_POINT_DTYPE.descr + [("label", "u1"), ("provenance", "u1")])


class FormatError(ValueError):
    """A file does not conform to its declared format."""


class BadMagicError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise TruncatedFileError(f"{what}: expected {n} bytes, got {len(data)}")
    return data


def _check_header(data: bytes, magic: bytes):
    got_magic, version, count, rings, columns, rev_start = _HEADER.unpack(data)
    if got_magic != magic:
        raise BadMagicError(f"bad magic {got_magic!r}, expected {magic!r}")
    if version != SCAN_VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    return count, rings, columns, rev_start


def write_scan(path, scan: LidarScan) -> None:
    records = np.empty(len(scan), dtype=_POINT_DTYPE)
    records["ring"] = scan.ring
    records["azimuth"] = scan.azimuth
    records["range"] = scan.range_m
    records["reflectivity"] = scan.reflectivity
    records["time"] = scan.time_us
    with open(path, "wb") as f:
        f.write(_HEADER.pack(SCAN_MAGIC, SCAN_VERSION, len(scan), scan.rings, scan.columns, scan.revolution_start_us))
        f.write(records.tobytes())


def read_scan(path) -> LidarScan:
    with open(path, "rb") as f:
        count, rings, columns, rev_start = _check_header(_read_exact(f, _HEADER.size, "scan header"), SCAN_MAGIC)
        records = np.frombuffer(_read_exact(f, count * _POINT_DTYPE.itemsize, "scan records"), dtype=_POINT_DTYPE)
    return LidarScan(
        ring=records["ring"].copy(),
        azimuth=records["azimuth"].copy(),
        range_m=records["range"].copy(),
        reflectivity=records["reflectivity"].copy(),
        time_us=records["time"].copy(),
        rings=rings,
        columns=columns,
        revolution_start_us=rev_start,
    )


def write_labeled_scan(path, labeled: LabeledScan) -> None:
    scan = labeled.scan
    records = np.empty(len(scan), dtype=_LABELED_DTYPE)
    records["ring"] = scan.ring
    records["azimuth"] = scan.azimuth
    records["range"] = scan.range_m
    records["reflectivity"] = scan.reflectivity
    records["time"] = scan.time_us
    records["label"] = labeled.labels
    records["provenance"] = labeled.provenance
    with open(path, "wb") as f:
        f.write(_HEADER.pack(LABELED_MAGIC, SCAN_VERSION, len(scan), scan.rings, scan.columns, scan.revolution_start_us))
        f.write(records.tobytes())


def read_labeled_scan(path) -> LabeledScan:
    with open(path, "rb") as f:
        count, rings, columns, rev_start = _check_header(_read_exact(f, _HEADER.size, "scan header"), LABELED_MAGIC)
        records = np.frombuffer(_read_exact(f, count * _LABELED_DTYPE.itemsize, "scan records"), dtype=_LABELED_DTYPE)
    scan = LidarScan(
        ring=records["ring"].copy(),
        azimuth=records["azimuth"].copy(),
        range_m=records["range"].copy(),
        reflectivity=records["reflectivity"].copy(),
        time_us=records["time"].copy(),
        rings=rings,
        columns=columns,
        revolution_start_us=rev_start,
    )
    return LabeledScan(scan=scan, labels=records["label"].copy(), provenance=records["provenance"].copy())


def write_pfm(path, image: np.ndarray) -> None:
    """Grayscale PFM, little-endian (scale -1.0), rows stored bottom-up."""
    image = np.asarray(image, dtype=np.float32)
    if image.ndim != 2:
        raise ValueError("PFM writer expects a 2-D array")
    with open(path, "wb") as f:
        f.write(f"Pf\n{image.shape[1]} {image.shape[0]}\n-1.0\n".encode("ascii"))
        f.write(image[::-1].astype("<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != b"Pf":
            raise BadMagicError(f"bad PFM magic {magic!r}")
        w, h = (int(v) for v in f.readline().split())
        scale = float(f.readline())
        data = np.frombuffer(_read_exact(f, w * h * 4, "PFM data"), dtype="<f4" if scale < 0 else ">f4")
    return data.reshape(h, w)[::-1].copy()


def _read_pnm_header(f, magic: bytes):
    if f.readline().strip() != magic:
        raise BadMagicError(f"not a {magic.decode()} file")
    fields = []
    while len(fields) < 3:
        line = f.readline()
        if not line:
            raise TruncatedFileError("PNM header ended early")
        if line.startswith(b"#"):
            continue
        fields += line.split()
    w, h, maxval = (int(v) for v in fields)
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}")
    return w, h


def write_pgm(path, image: np.ndarray) -> None:
    image = np.asarray(image, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{image.shape[1]} {image.shape[0]}\n255\n".encode("ascii"))
        f.write(image.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        w, h = _read_pnm_header(f, b"P5")
        data = np.frombuffer(_read_exact(f, w * h, "PGM data"), dtype=np.uint8)
    return data.reshape(h, w).copy()


def write_ppm(path, image: np.ndarray) -> None:
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("PPM writer expects an (H, W, 3) array")
    with open(path, "wb") as f:
        f.write(f"P6\n{image.shape[1]} {image.shape[0]}\n255\n".encode("ascii"))
        f.write(image.tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        w, h = _read_pnm_header(f, b"P6")
        data = np.frombuffer(_read_exact(f, w * h * 3, "PPM data"), dtype=np.uint8)
    return data.reshape(h, w, 3).copy()


def write_mask_pgm(path, valid: np.ndarray) -> None:
    """Validity mask as PGM: 255 = valid, 0 = invalid."""
    write_pgm(path, np.where(valid, 255, 0).astype(np.uint8))


def read_mask_pgm(path) -> np.ndarray:
    return read_pgm(path) != 0


def write_calibration(path, calib: CalibrationSet) -> None:
    intr = calib.intrinsics
    lines = [
        f"fx = {intr.fx!r}",
        f"fy = {intr.fy!r}",
        f"cx = {intr.cx!r}",
        f"cy = {intr.cy!r}",
        f"width = {intr.width}",
        f"height = {intr.height}",
        f"t_r_us = {intr.shutter_interval_us}",
        "lidar_to_vehicle = " + " ".join(repr(float(v)) for v in calib.lidar_to_vehicle.to_matrix().ravel()),
        "camera_to_vehicle = " + " ".join(repr(float(v)) for v in calib.camera_to_vehicle.to_matrix().ravel()),
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def read_calibration(path) -> CalibrationSet:
    kv = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        kv[key.strip()] = value.strip()
    try:
        intr = CameraIntrinsics(
            fx=float(kv["fx"]),
            fy=float(kv["fy"]),
            cx=float(kv["cx"]),
            cy=float(kv["cy"]),
            width=int(kv["width"]),
            height=int(kv["height"]),
            shutter_interval_us=int(kv["t_r_us"]),
        )
        l2v = RigidTransform.from_matrix(np.array([float(v) for v in kv["lidar_to_vehicle"].split()]).reshape(4, 4))
        c2v = RigidTransform.from_matrix(np.array([float(v) for v in kv["camera_to_vehicle"].split()]).reshape(4, 4))
    except KeyError as e:
        raise FormatError(f"calibration file missing key {e}") from e
    return CalibrationSet(lidar_to_vehicle=l2v, camera_to_vehicle=c2v, intrinsics=intr)


def write_pose_log(path, track_poses: list[TimedPose]) -> None:
    lines = []
    for tp in track_poses:
        values = [*tp.pose.translation, *tp.pose.to_quaternion()]
        lines.append(str(tp.time_us) + "," + ",".join(repr(float(v)) for v in values))
    Path(path).write_text("\n".join(lines) + "\n")


def read_pose_log(path) -> PoseTrack:
    poses = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 8:
            raise FormatError(f"pose log line has {len(parts)} fields, expected 8")
        t_us = int(parts[0])
        tx, ty, tz, qx, qy, qz, qw = (float(v) for v in parts[1:])
        poses.append(TimedPose(t_us, RigidTransform.from_quaternion(np.array([qx, qy, qz, qw]), [tx, ty, tz])))
    return PoseTrack(poses)


@dataclass
class FrameEntry:
    """One frame inside a sequence: paths are relative to the manifest."""

    scan: str
    semantic: str
    t_c_us: int
    labels: str | None = None


@dataclass
class SequenceEntry:
    id: str
    frames: list[FrameEntry]
    pose_log: str
    calibration: str
    split: str | None = None


@dataclass
class DatasetManifest:
    sequences: list[SequenceEntry]
    root: Path

    def resolve(self, rel: str) -> Path:
        return self.root / rel

    @property
    def frame_count(self) -> int:
        return sum(len(s.frames) for s in self.sequences)


def write_manifest(path, manifest: DatasetManifest) -> None:
    doc = {
        "sequences": [
            {
                "id": s.id,
                "pose_log": s.pose_log,
                "calibration": s.calibration,
                "split": s.split,
                "frames": [
                    {"scan": f.scan, "semantic": f.semantic, "t_c_us": f.t_c_us, "labels": f.labels}
                    for f in s.frames
                ],
            }
            for s in manifest.sequences
        ]
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    doc = json.loads(path.read_text())
    sequences = [
        SequenceEntry(
            id=s["id"],
            pose_log=s["pose_log"],
            calibration=s["calibration"],
            split=s.get("split"),
            frames=[
                FrameEntry(scan=f["scan"], semantic=f["semantic"], t_c_us=f["t_c_us"], labels=f.get("labels"))
                for f in s["frames"]
            ],
        )
        for s in doc["sequences"]
    ]
    return DatasetManifest(sequences=sequences, root=path.parent)
