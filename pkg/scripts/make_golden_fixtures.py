#!/usr/bin/env python3
"""Regenerate the checked-in golden files under tests/golden/.

Run only when a file format deliberately changes; the format-stability
tests pin the current bytes.
"""

import hashlib
import sys
from pathlib import Path

import numpy as np

from lidarseg import fileio
from lidarseg.autolabel import LabeledScan
from lidarseg.neural import LiLaNet, save_checkpoint
from lidarseg.projection import LidarScan, scan_to_image

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"


def golden_scan() -> LidarScan:
    # Values chosen to be exactly representable in float32.
    return LidarScan(
        ring=[0, 3, 7, 15, 31, 8, 8, 20],
        azimuth=np.float32([0.0, 0.5, 1.25, 3.0, 4.5, 5.75, 5.75097, 6.25]),
        range_m=np.float32([5.0, 10.25, 0.0, 42.5, 80.0, 7.75, 8.5, 33.125]),
        reflectivity=np.float32([0.5, 0.25, 0.0, 1.0, 0.125, 0.75, 0.0625, 0.375]),
        time_us=[0, 7958, 19894, 47747, 71620, 91512, 91527, 99472],
        rings=32,
        columns=1800,
        revolution_start_us=1_700_000_000_000_000,
    )


def main():
    GOLDEN.mkdir(parents=True, exist_ok=True)
    scan = golden_scan()
    fileio.write_scan(GOLDEN / "scan.llsc", scan)

    image = scan_to_image(scan)
    fileio.write_pfm(GOLDEN / "depth.pfm", image.depth)
    fileio.write_pfm(GOLDEN / "reflectivity.pfm", image.reflectivity)
    fileio.write_mask_pgm(GOLDEN / "valid.pgm", image.valid)

    labels = np.array([0, 1, 255, 4, 7, 9, 11, 12], dtype=np.uint8)
    provenance = np.array([0, 0, 3, 0, 0, 0, 0, 0], dtype=np.uint8)
    fileio.write_labeled_scan(GOLDEN / "labeled.llls", LabeledScan(scan, labels, provenance))

    net = LiLaNet(widths=(2, 2, 2, 2, 2)).initialize(0)
    save_checkpoint(GOLDEN / "weights.llnw", net)

    for f in sorted(GOLDEN.iterdir()):
        print(f"{hashlib.sha256(f.read_bytes()).hexdigest()}  {f.name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
