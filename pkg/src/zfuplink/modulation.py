"""
Gray-coded square QAM with unit average energy.

Symbol labels put the in-phase Gray code in the high bits and the
quadrature Gray code in the low bits; bits are MSB first.
"""

import math
from typing import Tuple

import numpy as np

from .system_model import SUPPORTED_QAM_ORDERS


def bits_per_symbol(order: int) -> int:
    if order not in SUPPORTED_QAM_ORDERS:
        raise ValueError(f"QAM order {order} not supported, expected one of {SUPPORTED_QAM_ORDERS}")
    return int(math.log2(order))


def gray_encode(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    return values ^ (values >> 1)


def gray_decode(codes: np.ndarray) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    values = codes.copy()
    shift = codes >> 1
    while np.any(shift):
        values ^= shift
        shift = shift >> 1
    return values


def _axis_geometry(order: int) -> Tuple[int, int, float]:
    half = bits_per_symbol(order) // 2
    side = 1 << half
    # average energy of the square grid with odd-integer levels is 2(M-1)/3
    norm = math.sqrt(2.0 * (order - 1) / 3.0)
    return half, side, norm


def qam_constellation(order: int) -> np.ndarray:
    """Constellation points indexed by symbol label."""
    half, side, norm = _axis_geometry(order)
    labels = np.arange(order)
    i_index = gray_decode(labels >> half)
    q_index = gray_decode(labels & (side - 1))
    levels = 2.0 * np.arange(side) - (side - 1)
    return (levels[i_index] + 1j * levels[q_index]) / norm


def labels_to_bits(labels: np.ndarray, order: int) -> np.ndarray:
    nbits = bits_per_symbol(order)
    labels = np.asarray(labels, dtype=np.int64).ravel()
    shifts = np.arange(nbits - 1, -1, -1)
    return ((labels[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def bits_to_labels(bits: np.ndarray, order: int) -> np.ndarray:
    nbits = bits_per_symbol(order)
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size % nbits:
        raise ValueError(f"{bits.size} bits do not fill whole {order}-QAM symbols")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    weights = 1 << np.arange(nbits - 1, -1, -1)
    return bits.reshape(-1, nbits) @ weights


def qam_map(bits: np.ndarray, order: int) -> np.ndarray:
    """Map a flat bit array onto unit-power symbols."""
    return qam_constellation(order)[bits_to_labels(bits, order)]


def qam_slice(soft: np.ndarray, order: int, p_u: float = 1.0) -> np.ndarray:
    """Minimum-distance decision on soft / sqrt(p_u), returned as symbol labels."""
    half, side, norm = _axis_geometry(order)
    scaled = np.asarray(soft) / math.sqrt(p_u) * norm
    i_index = np.clip(np.rint((scaled.real + (side - 1)) / 2.0), 0, side - 1).astype(np.int64)
    q_index = np.clip(np.rint((scaled.imag + (side - 1)) / 2.0), 0, side - 1).astype(np.int64)
    return (gray_encode(i_index) << half) | gray_encode(q_index)


def qam_demap(soft: np.ndarray, order: int, p_u: float = 1.0) -> np.ndarray:
    return labels_to_bits(qam_slice(soft, order, p_u), order)


def random_symbols(
    rng: np.random.Generator, order: int, shape: Tuple[int, ...]
) -> Tuple[np.ndarray, np.ndarray]:
    """Uniform labels and their constellation points."""
    labels = rng.integers(0, order, size=shape)
    return labels, qam_constellation(order)[labels]
