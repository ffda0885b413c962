"""Sample-domain impairments used to synthesize receptions."""

from __future__ import annotations

import numpy as np


def fractional_delay(x: np.ndarray, delay: float, pad: int | None = None) -> np.ndarray:
    """Band-limited delay by ``delay`` samples via an FFT phase ramp.

    The signal is zero padded on both sides (``pad`` samples each, default
    the larger of 32 and twice the integer delay) so the circular shift does
    not wrap; the output has the padded length with the original sample 0
    landing at index ``pad + delay``.
    """
    x = np.asarray(x, dtype=np.complex128)
    if pad is None:
        pad = max(32, 2 * int(np.ceil(abs(delay))))
    buf = np.concatenate([np.zeros(pad, complex), x, np.zeros(pad, complex)])
    n = len(buf)
    f = np.fft.fftfreq(n)
    return np.fft.ifft(np.fft.fft(buf) * np.exp(-2j * np.pi * f * delay))


def place(length: int, x: np.ndarray, at: float) -> np.ndarray:
    """Return a zero buffer of ``length`` samples containing x delayed to start at ``at``."""
    out = np.zeros(length, dtype=np.complex128)
    base = int(np.floor(at))
    frac = at - base
    if frac == 0.0:
        seg = np.asarray(x, dtype=np.complex128)
        lo = base
    else:
        pad = 16
        seg = fractional_delay(x, frac, pad=pad)
        lo = base - pad
    a, b = max(lo, 0), min(lo + len(seg), length)
    if b > a:
        out[a:b] += seg[a - lo:b - lo]
    return out


def apply_taps(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Multipath convolution; output keeps the input length."""
    x = np.asarray(x, dtype=np.complex128)
    taps = np.asarray(taps, dtype=np.complex128)
    return np.convolve(x, taps)[:len(x)]


def awgn(rng: np.random.Generator, n: int, snr_db: float, signal_power: float = 1.0) -> np.ndarray:
    sigma2 = signal_power / 10 ** (snr_db / 10)
    return np.sqrt(sigma2 / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def rayleigh_taps(rng: np.random.Generator, profile_db: np.ndarray) -> np.ndarray:
    """Block-fading taps with the given average power profile (normalized to unit total power)."""
    p = 10 ** (np.asarray(profile_db, dtype=float) / 10)
    p = p / p.sum()
    return np.sqrt(p / 2) * (rng.standard_normal(len(p)) + 1j * rng.standard_normal(len(p)))
