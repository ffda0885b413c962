"""Frame synchronization: exhaustive, standard and narrow search.

Every detector reports the preamble start tick, i.e. the first sample of
the preamble, for the role whose short training sequence matched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..roles import Role
from .correlate import auto_correlate_stream, correlation_profile, cross_correlate
from .params import CorrelatorCost, OfdmParams, SampleStream
from .preamble import FramePreamble

CROSS_THRESHOLD = 0.5
AUTO_THRESHOLD = 0.8


@dataclass(frozen=True)
class Detection:
    role: Role
    start_tick: int
    magnitude: float = field(default=0.0, compare=False)


def _sorted(dets: Iterable[Detection]) -> list[Detection]:
    return sorted(set(dets), key=lambda d: (d.start_tick, d.role.value))


def _first_peaks(prof: np.ndarray, threshold: float, L: int) -> list[int]:
    """Earliest strong peak of each cluster of repeated short symbols."""
    above = np.flatnonzero(prof >= threshold)
    peaks = []
    i = 0
    while i < len(above):
        t = int(above[i])
        hi = min(t + max(L // 2, 1), len(prof))
        p = t + int(np.argmax(prof[t:hi]))
        peaks.append(p)
        i = int(np.searchsorted(above, t + 3 * L))
    return peaks


def sync_exhaustive_cross(
    y: SampleStream,
    preambles: Iterable[FramePreamble],
    params: OfdmParams = OfdmParams(),
    threshold: float = CROSS_THRESHOLD,
    cost: CorrelatorCost | None = None,
) -> tuple[list[Detection], CorrelatorCost]:
    """Cross-correlate every role's short sequence against every sample."""
    cost = CorrelatorCost() if cost is None else cost
    L = params.sts_len
    n_pos = len(y.samples) - L + 1
    dets = []
    if n_pos <= 0:
        return dets, cost
    for pre in preambles:
        prof = correlation_profile(y.samples, pre.sts_sequence, 0, n_pos)
        cost.add_cross(n_pos, L)
        for p in _first_peaks(prof, threshold, L):
            start = y.origin_tick + p - pre.sts_offset
            if start >= y.origin_tick:
                dets.append(Detection(pre.role, start, float(prof[p])))
    return _sorted(dets), cost


def _runs(mask: np.ndarray, max_gap: int, min_len: int) -> list[tuple[int, int]]:
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > max_gap + 1)
    starts = np.concatenate([[0], breaks + 1])
    ends = np.concatenate([breaks, [len(idx) - 1]])
    return [(int(idx[s]), int(idx[e])) for s, e in zip(starts, ends) if idx[e] - idx[s] + 1 >= min_len]


def sync_standard(
    y: SampleStream,
    preambles: Iterable[FramePreamble],
    params: OfdmParams = OfdmParams(),
    threshold: float = AUTO_THRESHOLD,
    cross_threshold: float = CROSS_THRESHOLD,
    cost: CorrelatorCost | None = None,
) -> tuple[list[Detection], CorrelatorCost]:
    """Autocorrelation trigger followed by a narrow cross-correlation.

    The lag-L autocorrelation plateau of a 2STS field locates the field to
    within a few samples and its sign picks the candidate roles; only then is
    a cross-correlation over C + 1 positions spent to pin the exact start.
    """
    cost = CorrelatorCost() if cost is None else cost
    if not 0 < threshold <= 1:
        raise ValueError("autocorrelation threshold must lie in (0, 1]")
    L, C = params.sts_len, params.cp_len
    pres = list(preambles)
    if len(y.samples) < 2 * L:
        return [], cost
    auto = auto_correlate_stream(y, L, cost)
    plateau_lead = 2 * L - 1 + C // 2

    dets = []
    for lo, hi in _runs(auto.metric >= threshold, max_gap=L // 4, min_len=max(L // 4, 1)):
        center = auto.first_tick + (lo + hi) // 2
        negative = float(np.real(auto.values[lo:hi + 1].sum())) < 0
        rough = center - plateau_lead
        best = None
        for pre in pres:
            if pre.sts_negated != negative:
                continue
            lo_tick = max(rough - C // 2, y.origin_tick)
            hi_tick = min(rough + C // 2, y.end_tick - L)
            if hi_tick < lo_tick:
                continue
            res = cross_correlate(y, pre.sts_sequence, lo_tick, hi_tick - lo_tick + 1, cost)
            if res.peak_magnitude >= cross_threshold and (best is None or res.peak_magnitude > best[1]):
                best = (pre, res.peak_magnitude, res.peak_tick)
        if best is not None:
            pre, mag, tick = best
            start = tick - pre.sts_offset
            if start >= y.origin_tick:
                dets.append(Detection(pre.role, start, mag))
    return _sorted(dets), cost


def sync_narrow(
    y: SampleStream,
    preamble: FramePreamble,
    expected_tick: int,
    params: OfdmParams = OfdmParams(),
    threshold: float = CROSS_THRESHOLD,
    half_width: int | None = None,
    cost: CorrelatorCost | None = None,
) -> tuple[Detection | None, CorrelatorCost]:
    """Cross-correlate only within +-C/2 of where the preamble is expected to start."""
    cost = CorrelatorCost() if cost is None else cost
    hw = params.cp_len // 2 if half_width is None else half_width
    lo = expected_tick + preamble.sts_offset - hw
    res = cross_correlate(y, preamble.sts_sequence, lo, 2 * hw + 1, cost)
    if res.peak_magnitude < threshold:
        return None, cost
    return Detection(preamble.role, res.peak_tick - preamble.sts_offset, res.peak_magnitude), cost
