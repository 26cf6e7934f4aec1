import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lidarseg.projection import (
    LidarImage,
    LidarScan,
    azimuth_of_column,
    cell_of,
    cell_to_xyz,
    column_of_azimuth,
    default_elevation_table,
    direction_from_angles,
    image_to_scan,
    scan_to_image,
    scan_to_xyz,
)

from helpers import random_scan

TWO_PI = 2.0 * math.pi


# ------------------------------------------------------------------ cell_of

def test_forward_azimuth_maps_to_center_column():
    assert cell_of(0, 0.0, 1800) == (0, 900)


def test_ring_sets_row():
    assert cell_of(0, 0.0)[0] == 0
    assert cell_of(17, 1.0)[0] == 17


def test_near_full_turn_wraps_just_right_of_center():
    # azimuth 2*pi - eps falls in the last bin, one column right of center
    assert cell_of(0, TWO_PI - 1e-9, 1800) == (0, 901)


def test_boundary_azimuths_against_exact_arithmetic():
    # Exact-rational oracle for the bin index, evaluated at and around
    # every 50th bin edge.
    columns = 1800
    for k in range(0, columns, 50):
        for az, expected_bin in (
            (k * TWO_PI / columns + 1e-9, k),
            ((k + 0.5) * TWO_PI / columns, k),
            ((k + 1) * TWO_PI / columns - 1e-9, k),
        ):
            exact_bin = int(Fraction(az) * columns / Fraction(TWO_PI))
            assert exact_bin == expected_bin
            assert column_of_azimuth(az, columns) == (columns // 2 - expected_bin) % columns


def test_column_always_in_bounds():
    az = np.linspace(0, TWO_PI, 100_001)[:-1]
    cols = column_of_azimuth(az, 1800)
    assert cols.min() >= 0 and cols.max() < 1800


@given(st.integers(0, 1799))
def test_azimuth_of_column_inverts_column_of_azimuth(col):
    az = azimuth_of_column(col, 1800)
    assert column_of_azimuth(float(az), 1800) == col
    # and survives float32 storage
    assert column_of_azimuth(float(np.float32(az)), 1800) == col


# ------------------------------------------------------------- scan_to_image

def empty_scan(rings=32, columns=1800):
    z = np.zeros(0)
    return LidarScan(ring=z, azimuth=z, range_m=z, reflectivity=z, time_us=z,
                     rings=rings, columns=columns)


def test_empty_scan_gives_all_invalid_image():
    img = scan_to_image(empty_scan())
    assert not img.valid.any()
    assert (img.depth == 0).all() and (img.reflectivity == 0).all()
    assert (img.point_index == -1).all()


def test_single_point():
    scan = LidarScan(ring=[5], azimuth=[0.0], range_m=[10.0], reflectivity=[0.4],
                     time_us=[123], rings=32, columns=1800)
    img = scan_to_image(scan)
    assert img.valid.sum() == 1
    assert img.depth[5, 900] == np.float32(10.0)
    assert img.reflectivity[5, 900] == np.float32(0.4)
    assert img.time_us[5, 900] == 123
    assert img.point_index[5, 900] == 0


def test_nearest_point_wins_cell_collision():
    scan = LidarScan(ring=[3, 3], azimuth=[0.001, 0.002], range_m=[10.0, 7.0],
                     reflectivity=[0.1, 0.9], time_us=[1, 2], rings=32, columns=1800)
    img = scan_to_image(scan)
    assert img.valid.sum() == 1
    assert img.depth[3, 900] == np.float32(7.0)
    assert img.reflectivity[3, 900] == np.float32(0.9)
    assert img.point_index[3, 900] == 1


def test_invalid_returns_do_not_occupy_cells():
    scan = LidarScan(ring=[0, 1], azimuth=[0.0, 0.0], range_m=[0.0, 5.0],
                     reflectivity=[0.0, 0.5], time_us=[0, 0], rings=32, columns=1800)
    img = scan_to_image(scan)
    assert img.valid.sum() == 1
    assert not img.valid[0, 900]


# ------------------------------------------------------------- image_to_scan

def test_all_invalid_image_gives_empty_scan():
    shape = (32, 1800)
    img = LidarImage(np.zeros(shape, np.float32), np.zeros(shape, np.float32),
                     np.zeros(shape, bool), np.zeros(shape, np.int64))
    assert len(image_to_scan(img)) == 0


def test_one_point_round_trip_bit_exact():
    scan = LidarScan(ring=[5], azimuth=[0.0], range_m=[10.0], reflectivity=[0.4],
                     time_us=[77], rings=32, columns=1800)
    back = image_to_scan(scan_to_image(scan))
    assert len(back) == 1
    assert back.ring[0] == 5
    assert back.range_m[0].tobytes() == np.float32(10.0).tobytes()
    assert back.reflectivity[0].tobytes() == np.float32(0.4).tobytes()
    assert back.time_us[0] == 77
    # azimuth is quantized to the bin center of column 900
    assert back.azimuth[0] == np.float32(azimuth_of_column(900, 1800))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40)
def test_round_trip_losslessness(seed):
    scan = random_scan(np.random.default_rng(seed))
    img = scan_to_image(scan)
    back = image_to_scan(img)

    assert img.valid.sum() == len(scan) == len(back)  # validity consistency
    assert (img.depth[img.valid] > 0).all()  # depth positivity

    order = np.lexsort((back.azimuth, back.ring))
    orig = np.lexsort((scan.azimuth, scan.ring))
    np.testing.assert_array_equal(back.ring[order], scan.ring[orig])
    # bit-exact payloads
    assert back.range_m[order].tobytes() == scan.range_m[orig].tobytes()
    assert back.reflectivity[order].tobytes() == scan.reflectivity[orig].tobytes()
    np.testing.assert_array_equal(back.time_us[order], scan.time_us[orig])
    # cells identical; azimuth only quantized within its original bin
    np.testing.assert_array_equal(
        column_of_azimuth(back.azimuth[order], scan.columns),
        column_of_azimuth(scan.azimuth[orig], scan.columns),
    )


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20)
def test_image_round_trip_is_identity_on_images(seed):
    img = scan_to_image(random_scan(np.random.default_rng(seed)))
    again = scan_to_image(image_to_scan(img))
    np.testing.assert_array_equal(img.valid, again.valid)
    assert img.depth.tobytes() == again.depth.tobytes()
    assert img.reflectivity.tobytes() == again.reflectivity.tobytes()
    np.testing.assert_array_equal(img.time_us, again.time_us)


# ----------------------------------------------------------------- geometry

def test_direction_examples():
    np.testing.assert_allclose(10 * direction_from_angles(0.0, 0.0), [10, 0, 0], atol=1e-12)
    np.testing.assert_allclose(5 * direction_from_angles(0.0, math.pi / 2), [0, 0, 5], atol=1e-12)
    np.testing.assert_allclose(
        2 * direction_from_angles(math.pi / 2, math.pi / 6),
        [0, 2 * math.cos(math.pi / 6), 1.0],
        atol=1e-7,
    )
    np.testing.assert_allclose(
        2 * direction_from_angles(math.pi / 2, math.pi / 6), [0, 1.7320508, 1.0], atol=1e-7
    )


def test_cell_to_xyz_uses_bin_center_and_ring_elevation():
    elev = np.deg2rad(np.linspace(15, -25, 32))
    row, col, r = 7, 412, 12.5
    expected = r * direction_from_angles(azimuth_of_column(col, 1800), elev[row])
    np.testing.assert_allclose(cell_to_xyz(row, col, r, elev, 1800), expected, atol=1e-12)


def test_scan_to_xyz_matches_cell_to_xyz_at_bin_centers():
    scan = image_to_scan(scan_to_image(random_scan(np.random.default_rng(5), n_points=50)))
    elev = default_elevation_table(scan.rings)
    xyz = scan_to_xyz(scan, elev)
    cols = column_of_azimuth(scan.azimuth, scan.columns)
    for i in range(len(scan)):
        np.testing.assert_allclose(
            xyz[i],
            cell_to_xyz(int(scan.ring[i]), int(cols[i]), float(scan.range_m[i]), elev, scan.columns),
            atol=1e-4,  # scan azimuths are float32; ~range * eps(float32)
        )


def test_default_elevation_table():
    table = default_elevation_table()
    assert len(table) == 32
    assert table[0] == pytest.approx(math.radians(15))
    assert table[-1] == pytest.approx(math.radians(-25))
    assert (np.diff(table) < 0).all()


# --------------------------------------------------------------- validation

def test_scan_rejects_bad_azimuth():
    with pytest.raises(ValueError):
        LidarScan(ring=[0], azimuth=[TWO_PI], range_m=[1.0], reflectivity=[0.5], time_us=[0])
    with pytest.raises(ValueError):
        LidarScan(ring=[0], azimuth=[-0.1], range_m=[1.0], reflectivity=[0.5], time_us=[0])


def test_scan_rejects_out_of_range_ring():
    with pytest.raises(ValueError):
        LidarScan(ring=[32], azimuth=[0.0], range_m=[1.0], reflectivity=[0.5], time_us=[0], rings=32)


def test_image_invariant_enforced():
    shape = (2, 4)
    depth = np.zeros(shape, np.float32)
    depth[0, 0] = 3.0
    with pytest.raises(ValueError):  # valid cell claims depth but mask says invalid
        LidarImage(depth, np.zeros(shape, np.float32), np.zeros(shape, bool), np.zeros(shape, np.int64))
