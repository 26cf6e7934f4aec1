"""Label sets: the 19-class Cityscapes source set, the reduced 13-class
LiDAR set, the mapping between them, and display palettes.

Cityscapes classes carry their standard train ids so that label images
produced by off-the-shelf image networks can be consumed directly. LiDAR
class ids are 0..12 with 255 reserved for unlabeled pixels/points, which
doubles as the ignore id during training and evaluation.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

UNLABELED = 255


class UnknownLabelError(ValueError):
    """A label image contains an id outside its declared label set."""


class CityscapesClass(IntEnum):
    ROAD = 0
    SIDEWALK = 1
    BUILDING = 2
    WALL = 3
    FENCE = 4
    POLE = 5
    TRAFFIC_LIGHT = 6
    TRAFFIC_SIGN = 7
    VEGETATION = 8
    TERRAIN = 9
    SKY = 10
    PERSON = 11
    RIDER = 12
    CAR = 13
    TRUCK = 14
    BUS = 15
    ON_RAILS = 16
    MOTORCYCLE = 17
    BICYCLE = 18


class LidarClass(IntEnum):
    ROAD = 0
    SIDEWALK = 1
    PERSON = 2
    RIDER = 3
    SMALL_VEHICLE = 4
    LARGE_VEHICLE = 5
    TWO_WHEELER = 6
    CONSTRUCTION = 7
    POLE = 8
    TRAFFIC_SIGN = 9
    VEGETATION = 10
    TERRAIN = 11
    SKY = 12


NUM_CLASSES = 13

# Sky is excluded from metric aggregation: invalid returns are never
# annotated, so no ground truth for it exists.
EVAL_CLASSES = tuple(c for c in LidarClass if c != LidarClass.SKY)

CITYSCAPES_TO_LIDAR = {
    CityscapesClass.ROAD: LidarClass.ROAD,
    CityscapesClass.SIDEWALK: LidarClass.SIDEWALK,
    CityscapesClass.PERSON: LidarClass.PERSON,
    CityscapesClass.RIDER: LidarClass.RIDER,
    CityscapesClass.CAR: LidarClass.SMALL_VEHICLE,
    CityscapesClass.TRUCK: LidarClass.LARGE_VEHICLE,
    CityscapesClass.BUS: LidarClass.LARGE_VEHICLE,
    CityscapesClass.ON_RAILS: LidarClass.LARGE_VEHICLE,
    CityscapesClass.MOTORCYCLE: LidarClass.TWO_WHEELER,
    CityscapesClass.BICYCLE: LidarClass.TWO_WHEELER,
    CityscapesClass.BUILDING: LidarClass.CONSTRUCTION,
    CityscapesClass.WALL: LidarClass.CONSTRUCTION,
    CityscapesClass.FENCE: UNLABELED,
    CityscapesClass.POLE: LidarClass.POLE,
    CityscapesClass.TRAFFIC_SIGN: LidarClass.TRAFFIC_SIGN,
    CityscapesClass.TRAFFIC_LIGHT: LidarClass.CONSTRUCTION,
    CityscapesClass.VEGETATION: LidarClass.VEGETATION,
    CityscapesClass.TERRAIN: LidarClass.TERRAIN,
    CityscapesClass.SKY: LidarClass.SKY,
}

CITYSCAPES_PALETTE = {
    CityscapesClass.ROAD: (128, 64, 128),
    CityscapesClass.SIDEWALK: (244, 35, 232),
    CityscapesClass.BUILDING: (70, 70, 70),
    CityscapesClass.WALL: (102, 102, 156),
    CityscapesClass.FENCE: (190, 153, 153),
    CityscapesClass.POLE: (153, 153, 153),
    CityscapesClass.TRAFFIC_LIGHT: (250, 170, 30),
    CityscapesClass.TRAFFIC_SIGN: (220, 220, 0),
    CityscapesClass.VEGETATION: (107, 142, 35),
    CityscapesClass.TERRAIN: (152, 251, 152),
    CityscapesClass.SKY: (70, 130, 180),
    CityscapesClass.PERSON: (220, 20, 60),
    CityscapesClass.RIDER: (255, 0, 0),
    CityscapesClass.CAR: (0, 0, 142),
    CityscapesClass.TRUCK: (0, 0, 70),
    CityscapesClass.BUS: (0, 60, 100),
    CityscapesClass.ON_RAILS: (0, 80, 100),
    CityscapesClass.MOTORCYCLE: (0, 0, 230),
    CityscapesClass.BICYCLE: (119, 11, 32),
}

# Merged classes take the color of a representative source class.
_REPRESENTATIVE = {
    LidarClass.ROAD: CityscapesClass.ROAD,
    LidarClass.SIDEWALK: CityscapesClass.SIDEWALK,
    LidarClass.PERSON: CityscapesClass.PERSON,
    LidarClass.RIDER: CityscapesClass.RIDER,
    LidarClass.SMALL_VEHICLE: CityscapesClass.CAR,
    LidarClass.LARGE_VEHICLE: CityscapesClass.TRUCK,
    LidarClass.TWO_WHEELER: CityscapesClass.MOTORCYCLE,
    LidarClass.CONSTRUCTION: CityscapesClass.BUILDING,
    LidarClass.POLE: CityscapesClass.POLE,
    LidarClass.TRAFFIC_SIGN: CityscapesClass.TRAFFIC_SIGN,
    LidarClass.VEGETATION: CityscapesClass.VEGETATION,
    LidarClass.TERRAIN: CityscapesClass.TERRAIN,
    LidarClass.SKY: CityscapesClass.SKY,
}


def map_class(c: CityscapesClass) -> int:
    """Reduced LiDAR class (or UNLABELED) for one Cityscapes class."""
    return CITYSCAPES_TO_LIDAR[CityscapesClass(c)]


def class_color(c) -> tuple[int, int, int]:
    """Display color of a LiDAR class; unlabeled renders black."""
    if c == UNLABELED:
        return (0, 0, 0)
    return CITYSCAPES_PALETTE[_REPRESENTATIVE[LidarClass(c)]]


def _remap_lut() -> np.ndarray:
    lut = np.full(256, UNLABELED, dtype=np.uint8)
    for src, dst in CITYSCAPES_TO_LIDAR.items():
        lut[int(src)] = int(dst)
    return lut


_LUT = _remap_lut()
_KNOWN_SOURCE_IDS = np.zeros(256, dtype=bool)
for _c in CityscapesClass:
    _KNOWN_SOURCE_IDS[int(_c)] = True
_KNOWN_SOURCE_IDS[UNLABELED] = True  # already-unlabeled pixels pass through


def remap_image(img: np.ndarray) -> np.ndarray:
    """Element-wise Cityscapes -> LiDAR class remap of a label image.

    Raises UnknownLabelError if any pixel holds an id outside the
    Cityscapes set (unlabeled 255 is allowed and passes through).
    """
    img = np.asarray(img)
    if not _KNOWN_SOURCE_IDS[img].all():
        bad = np.unique(img[~_KNOWN_SOURCE_IDS[img]])
        raise UnknownLabelError(f"label ids outside the Cityscapes set: {bad.tolist()}")
    return _LUT[img]


def colorize(label_img: np.ndarray) -> np.ndarray:
    """(H, W) LiDAR label image -> (H, W, 3) uint8 RGB for visualization."""
    lut = np.zeros((256, 3), dtype=np.uint8)
    for c in LidarClass:
        lut[int(c)] = class_color(c)
    return lut[np.asarray(label_img)]
