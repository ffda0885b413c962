from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EstimationError, RangeError
from ..roles import Role
from .params import OfdmParams
from .preamble import FramePreamble, signed_subcarriers


@dataclass(frozen=True)
class Csi:
    """Per-subcarrier channel gain in FFT-bin order.

    ``valid`` marks bins that were actually measured; the others are filled
    by linear interpolation across neighbouring measured subcarriers.
    """

    per_subcarrier_gain: np.ndarray
    source_role: Role
    valid: np.ndarray

    def __post_init__(self):
        if len(self.per_subcarrier_gain) != len(self.valid):
            raise ValueError("gain and validity mask lengths differ")

    @property
    def n_subcarriers(self) -> int:
        return len(self.per_subcarrier_gain)


def _fill(gain: np.ndarray, valid: np.ndarray) -> np.ndarray:
    n = len(gain)
    k = signed_subcarriers(n)
    order = np.argsort(k)
    ks, gs, vs = k[order], gain[order], valid[order]
    filled = np.interp(ks, ks[vs], gs[vs].real) + 1j * np.interp(ks, ks[vs], gs[vs].imag)
    out = np.empty(n, dtype=np.complex128)
    out[order] = filled
    return out


def estimate_csi(y_lts_region: np.ndarray, preamble: FramePreamble, params: OfdmParams = OfdmParams()) -> Csi:
    """Least-squares channel estimate from one or more LTS bodies.

    ``y_lts_region`` holds k * N_s samples starting at the first LTS body;
    the per-body estimates are averaged.
    """
    N = params.n_subcarriers
    y = np.asarray(y_lts_region, dtype=np.complex128)
    if len(y) == 0 or len(y) % N:
        raise RangeError(f"LTS region of {len(y)} samples is not a whole number of {N}-sample bodies")
    Y = np.fft.fft(y.reshape(-1, N), axis=1).mean(axis=0)
    mask = preamble.lts_mask
    gain = np.zeros(N, dtype=np.complex128)
    gain[mask] = Y[mask] / preamble.lts_freq[mask]
    return Csi(_fill(gain, mask), preamble.role, mask.copy())


def shift_csi(csi: Csi, delta: float) -> Csi:
    """Apply an extra delay of ``delta`` samples: bin k is multiplied by exp(-j 2 pi delta k / N_s)."""
    n = csi.n_subcarriers
    k = signed_subcarriers(n)
    ramp = np.exp(-2j * np.pi * delta * k / n)
    return Csi(csi.per_subcarrier_gain * ramp, csi.source_role, csi.valid.copy())


def phase_slope_offset(csi: Csi) -> float:
    """Delay in samples from the slope of unwrapped phase against subcarrier index.

    A delay of D samples rotates subcarrier k by -2 pi D k / N_s. A coarse
    slope from adjacent measured subcarrier pairs is removed first so the
    residual phase unwraps cleanly across the gaps in a user's subcarrier
    set; the least-squares slope of the residual refines it.
    """
    n = csi.n_subcarriers
    k = signed_subcarriers(n)
    g = csi.per_subcarrier_gain
    valid = csi.valid & (np.abs(g) > 1e-12 * max(1.0, float(np.abs(g).max(initial=0.0))))
    if valid.sum() < 2 or float(np.abs(g[valid]).max(initial=0.0)) == 0.0:
        raise EstimationError("channel estimate has fewer than two usable subcarriers")

    order = np.argsort(k)
    ks, gs, vs = k[order], g[order], valid[order]
    ks, gs = ks[vs], gs[vs]

    adjacent = np.flatnonzero(np.diff(ks) == 1)
    coarse = float(np.angle(np.sum(gs[adjacent + 1] * np.conj(gs[adjacent])))) if len(adjacent) else 0.0
    resid = np.unwrap(np.angle(gs * np.exp(-1j * coarse * ks)))
    fine = np.polyfit(ks.astype(float), resid, 1)[0]
    slope = coarse + fine
    return float(-slope * n / (2 * np.pi))


def arrival_diff(csi_a: Csi, csi_b: Csi) -> float:
    return phase_slope_offset(csi_a) - phase_slope_offset(csi_b)
