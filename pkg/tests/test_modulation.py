import numpy as np
import pytest

from src.zfuplink.modulation import (
    bits_per_symbol,
    bits_to_labels,
    gray_decode,
    gray_encode,
    labels_to_bits,
    qam_constellation,
    qam_demap,
    qam_map,
    qam_slice,
    random_symbols,
)


@pytest.mark.parametrize("order", [4, 16, 64, 256])
def test_unit_average_energy(order):
    points = qam_constellation(order)
    assert points.shape == (order,)
    assert np.mean(np.abs(points) ** 2) == pytest.approx(1.0)
    assert len(np.unique(np.round(points, 12))) == order


@pytest.mark.parametrize("order", [16, 64])
def test_gray_neighbours_differ_in_one_bit(order):
    points = qam_constellation(order)
    distance = np.abs(points[:, None] - points[None, :])
    nearest = np.min(distance[distance > 1e-12])
    for i, j in zip(*np.where(np.isclose(distance, nearest))):
        assert bin(i ^ j).count("1") == 1


def test_gray_code_is_invertible():
    values = np.arange(64)
    np.testing.assert_array_equal(gray_decode(gray_encode(values)), values)


@pytest.mark.parametrize("order", [4, 16, 64])
def test_slicing_constellation_points(order):
    labels = np.arange(order)
    np.testing.assert_array_equal(qam_slice(qam_constellation(order), order), labels)


def test_slice_with_power_and_noise():
    rng = np.random.default_rng(0)
    labels, symbols = random_symbols(rng, 16, (1000,))
    power = 25.0
    soft = np.sqrt(power) * symbols + 0.05 * (rng.standard_normal(1000) + 1j * rng.standard_normal(1000))
    np.testing.assert_array_equal(qam_slice(soft, 16, p_u=power), labels)


def test_far_outliers_clip_to_corners():
    labels = qam_slice(np.array([100 + 100j, -100 - 100j]), 16)
    corners = qam_constellation(16)[labels]
    assert corners[0].real > 0 and corners[0].imag > 0
    assert corners[1].real < 0 and corners[1].imag < 0
    assert np.abs(corners[0]) == pytest.approx(np.max(np.abs(qam_constellation(16))))


def test_bit_mapping():
    bits = np.array([0, 1, 1, 0, 1, 1, 1, 1], dtype=np.uint8)
    labels = bits_to_labels(bits, 16)
    np.testing.assert_array_equal(labels, [6, 15])
    np.testing.assert_array_equal(labels_to_bits(labels, 16), bits)
    np.testing.assert_array_equal(qam_demap(qam_map(bits, 16), 16), bits)


def test_bit_mapping_errors():
    with pytest.raises(ValueError, match="whole"):
        bits_to_labels(np.array([1, 0, 1]), 16)
    with pytest.raises(ValueError, match="0 or 1"):
        bits_to_labels(np.array([2, 0, 1, 0]), 16)
    with pytest.raises(ValueError, match="not supported"):
        bits_per_symbol(8)
