from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import RangeError
from .params import CorrelatorCost, SampleStream


@dataclass
class CrossResult:
    peak_tick: int
    peak_magnitude: float
    cost: CorrelatorCost


@dataclass
class AutoCorrelation:
    """Lag-L autocorrelation a[n] for window-end ticks n = first_tick, first_tick + 1, ...

    a[n] = sum_{i=1..L} y[n-2L+i] * conj(y[n-L+i])
    """

    first_tick: int
    values: np.ndarray
    metric: np.ndarray
    cost: CorrelatorCost

    def at(self, tick: int) -> complex:
        return complex(self.values[tick - self.first_tick])


def correlation_profile(samples: np.ndarray, x: np.ndarray, start: int, count: int, normalize: bool = True) -> np.ndarray:
    """|c| for matched windows beginning at samples[start], ..., samples[start + count - 1]."""
    L = len(x)
    seg = samples[start:start + count + L - 1]
    windows = sliding_window_view(seg, L)
    c = windows @ np.conj(x)
    mag = np.abs(c)
    if not normalize:
        return mag
    energy = np.einsum("ij,ij->i", windows.real, windows.real) + np.einsum("ij,ij->i", windows.imag, windows.imag)
    denom = np.sqrt(energy) * np.linalg.norm(x)
    out = np.zeros_like(mag)
    nz = denom > 1e-12 * max(1.0, float(denom.max(initial=0.0)))
    out[nz] = mag[nz] / denom[nz]
    return out


def cross_correlate(
    y: SampleStream,
    x: np.ndarray,
    search_start: int,
    search_len: int,
    cost: CorrelatorCost | None = None,
    normalize: bool = True,
) -> CrossResult:
    """Slide x over y and return the strongest match.

    Ticks are reported at the first sample of the matched window, so a copy of
    x embedded at tick t peaks at t. Costs len(x) complex multiplies per
    searched position.
    """
    cost = CorrelatorCost() if cost is None else cost
    L = len(x)
    off = search_start - y.origin_tick
    if search_len <= 0 or off < 0 or off + search_len + L - 1 > len(y.samples):
        raise RangeError(
            f"search [{search_start}, {search_start + search_len}) needs samples up to "
            f"{search_start + search_len + L - 1}, stream covers [{y.origin_tick}, {y.end_tick})"
        )
    prof = correlation_profile(y.samples, x, off, search_len, normalize)
    cost.add_cross(search_len, L)
    k = int(np.argmax(prof))
    return CrossResult(search_start + k, float(prof[k]), cost)


def auto_correlate_stream(y: SampleStream, L: int, cost: CorrelatorCost | None = None) -> AutoCorrelation:
    """Running lag-L autocorrelation using a[n] = a[n-1] + y[n-L]y*[n] - y[n-2L]y*[n-L].

    The first value costs L multiplies; every later value costs exactly two.
    The metric is |a[n]| / sqrt(E1 E2) with E1, E2 the energies of the two
    L-sample halves.
    """
    cost = CorrelatorCost() if cost is None else cost
    n_total = len(y.samples)
    if n_total < 2 * L:
        raise RangeError(f"stream of {n_total} samples is shorter than 2L = {2 * L}")
    s = y.samples.tolist()
    count = n_total - 2 * L + 1

    acc = 0j
    for i in range(L):
        acc += s[i] * s[L + i].conjugate()
    vals = [acc]
    for n in range(2 * L, n_total):
        acc = acc + s[n - L] * s[n].conjugate() - s[n - 2 * L] * s[n - L].conjugate()
        vals.append(acc)
    cost.add(L + 2 * (count - 1), (L - 1) + 2 * (count - 1))

    values = np.asarray(vals, dtype=np.complex128)
    power = np.concatenate([[0.0], np.cumsum(np.abs(y.samples) ** 2)])
    e_first = power[L:L + count] - power[0:count]
    e_second = power[2 * L:2 * L + count] - power[L:L + count]
    denom = np.sqrt(np.clip(e_first, 0.0, None) * np.clip(e_second, 0.0, None))
    metric = np.zeros(count)
    scale = float(denom.max(initial=0.0))
    nz = denom > 1e-12 * max(scale, 1e-300)
    metric[nz] = np.abs(values[nz]) / denom[nz]
    return AutoCorrelation(y.origin_tick + 2 * L - 1, values, metric, cost)
