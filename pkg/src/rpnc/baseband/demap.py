from __future__ import annotations

import numpy as np

from ..errors import DemapError


def bpsk(bits: np.ndarray) -> np.ndarray:
    """Map bit 0 to +1 and bit 1 to -1."""
    return 1.0 - 2.0 * np.asarray(bits, dtype=float)


def xor_demap_bpsk(y: np.ndarray, h_a: complex, h_b: complex) -> np.ndarray:
    """Per-symbol ML decision over the four superimposed BPSK points, returning a XOR b."""
    if abs(h_a) == 0 or abs(h_b) == 0:
        raise DemapError("channel gain of zero leaves a user undetectable")
    pairs = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])
    points = h_a * bpsk(pairs[:, 0]) + h_b * bpsk(pairs[:, 1])
    y = np.asarray(y, dtype=np.complex128)
    nearest = np.argmin(np.abs(y[:, None] - points[None, :]), axis=1)
    return (pairs[nearest, 0] ^ pairs[nearest, 1]).astype(np.uint8)
