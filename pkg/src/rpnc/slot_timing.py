"""Slot-boundary tracking from reference-packet arrivals.

Hardware times are exact ``Fraction`` seconds. A node learns the time of a
sample by counting: the n-th sample after the first hardware sample arrived
at T0 + n / B. Boundaries start from the first reference arrival, are
adjusted by whole samples once per window of W slots, and every adjustment
applies to all later boundaries.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from fractions import Fraction
from numbers import Rational

from .errors import ParameterError, SequencingError

TIME_RESOLUTION = Fraction(1, 100_000_000)


def as_time(value) -> Fraction:
    """Exact Fraction seconds; floats are taken at their exact binary value."""
    return value if isinstance(value, Fraction) else Fraction(value)


def quantize_time(t, resolution: Fraction = TIME_RESOLUTION) -> Fraction:
    """Round a hardware time to the timestamp resolution (10 ns by default)."""
    t = as_time(t)
    return round(t / resolution) * resolution


def sample_count_arrival(n_samples: int, t0, bandwidth):
    """Arrival time T = T0 + N / B.

    Exact when t0 or bandwidth is rational; plain float arithmetic otherwise.
    """
    if bandwidth <= 0:
        raise ParameterError("bandwidth must be positive")
    if isinstance(t0, Rational) and isinstance(bandwidth, Rational):
        return Fraction(t0) + Fraction(n_samples) / Fraction(bandwidth)
    return t0 + n_samples / bandwidth


class SampleCounter:
    """Sample-count clock with re-anchoring when the counter is about to overflow."""

    def __init__(self, t0, bandwidth, limit: int | None = None):
        self.t0 = as_time(t0)
        self.bandwidth = as_time(bandwidth)
        self.limit = limit
        self._base_tick = 0

    def time_of(self, tick: int) -> Fraction:
        n = tick - self._base_tick
        if n < 0:
            raise SequencingError(f"tick {tick} precedes the current anchor {self._base_tick}")
        if self.limit is not None and n >= self.limit:
            self.reanchor(tick)
            n = 0
        return self.t0 + Fraction(n) / self.bandwidth

    def reanchor(self, tick: int) -> None:
        """Restart counting at ``tick`` with a fresh T0 equal to that sample's time."""
        self.t0 = self.t0 + Fraction(tick - self._base_tick) / self.bandwidth
        self._base_tick = tick


@dataclass(frozen=True)
class ArrivalRecord:
    slot_index: int
    arrival_time: Fraction


@dataclass(frozen=True)
class TxDelayBound:
    delta_bound: Fraction = Fraction(4, 1000)
    phi_bound: Fraction = Fraction(4, 1000)
    one_slot_ahead: bool = True

    def check(self, slot_duration) -> None:
        if self.one_slot_ahead and as_time(self.delta_bound) + as_time(self.phi_bound) >= as_time(slot_duration):
            raise ParameterError("one-slot-ahead scheduling needs delta + phi < T_s")


@dataclass(frozen=True)
class SlotSchedule:
    """Boundary state of one node.

    ``t0`` is the hardware time of the reference arrival that anchors slot 0.
    ``adjustments`` lists (first affected slot, cumulative shift in samples)
    in increasing slot order. Window ``window_index`` covers slots
    [window_index * W, (window_index + 1) * W - 1].
    """

    t0: Fraction
    slot_duration: Fraction
    sample_period: Fraction
    window: int = 10
    adjustments: tuple[tuple[int, int], ...] = ()
    window_index: int = 0
    arrivals_in_window: tuple[ArrivalRecord, ...] = field(default=())
    _memo: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def cumulative_adjust(self) -> int:
        return self.adjustments[-1][1] if self.adjustments else 0

    @property
    def boundaries_base(self) -> Fraction:
        return self.t0 + self.cumulative_adjust * self.sample_period

    @property
    def window_first_slot(self) -> int:
        return self.window_index * self.window

    @property
    def trigger_slot(self) -> int:
        return (self.window_index + 1) * self.window - 1

    def adjust_for(self, n: int) -> int:
        i = bisect_right(self.adjustments, n, key=lambda a: a[0])
        return self.adjustments[i - 1][1] if i else 0

    def boundary(self, n: int) -> Fraction:
        b = self._memo.get(n)
        if b is None:
            b = self._memo[n] = self.t0 + n * self.slot_duration + self.adjust_for(n) * self.sample_period
        return b

    def slot_at(self, t) -> int:
        """Index of the slot whose boundary is the latest one not after t."""
        t = as_time(t)
        n = math.floor((t - self.boundaries_base) / self.slot_duration)
        while self.boundary(n + 1) <= t:
            n += 1
        while self.boundary(n) > t:
            n -= 1
        return n


def init_boundaries(first_ref_arrival, t_s, sample_period=Fraction(1, 5_000_000), window: int = 10) -> SlotSchedule:
    """Anchor slot 0 at the first reference arrival: S_n = T + n T_s."""
    t_s = as_time(t_s)
    if t_s <= 0:
        raise ParameterError("slot duration must be positive")
    if window < 1:
        raise ParameterError("window must hold at least one slot")
    return SlotSchedule(as_time(first_ref_arrival), t_s, as_time(sample_period), window)


def record_arrival(sched: SlotSchedule, rec: ArrivalRecord) -> SlotSchedule:
    lo, hi = sched.window_first_slot, sched.trigger_slot
    if not lo <= rec.slot_index <= hi:
        raise SequencingError(f"arrival for slot {rec.slot_index} outside current window [{lo}, {hi}]")
    if any(a.slot_index == rec.slot_index for a in sched.arrivals_in_window):
        raise SequencingError(f"slot {rec.slot_index} already has a reference arrival")
    out = replace(sched, arrivals_in_window=sched.arrivals_in_window + (rec,))
    object.__setattr__(out, "_memo", sched._memo)  # boundaries are unchanged
    return out


def window_drift(sched: SlotSchedule, sample_period=None) -> int:
    """floor(mean(T_j - S_j)) in whole samples over the window's arrivals; 0 if none."""
    arrivals = sched.arrivals_in_window
    if not arrivals:
        return 0
    period = sched.sample_period if sample_period is None else as_time(sample_period)
    # sum(T_j - S_j) with the boundary sum expanded so slot indices and
    # adjustments are summed as integers
    k = len(arrivals)
    slots = sum(a.slot_index for a in arrivals)
    adjust = sum(sched.adjust_for(a.slot_index) for a in arrivals)
    arrived = sum((as_time(a.arrival_time) for a in arrivals), Fraction(0))
    total = arrived - k * sched.t0 - slots * sched.slot_duration - adjust * sched.sample_period
    return math.floor(total / (k * period))


def realign(sched: SlotSchedule, delta_t: int, trigger_slot: int | None = None) -> SlotSchedule:
    """Shift every boundary from the next window onward by ``delta_t`` samples and open that window."""
    if trigger_slot is not None and trigger_slot != sched.trigger_slot:
        raise SequencingError(
            f"realignment at slot {trigger_slot}, but window {sched.window_index} triggers at {sched.trigger_slot}"
        )
    adjustments = sched.adjustments
    if delta_t:
        adjustments = adjustments + ((sched.trigger_slot + 1, sched.cumulative_adjust + int(delta_t)),)
    return replace(sched, adjustments=adjustments, window_index=sched.window_index + 1, arrivals_in_window=())


def advance_to(sched: SlotSchedule, slot: int) -> SlotSchedule:
    """Close every window that ended before ``slot`` without an arrival-driven trigger."""
    while sched.trigger_slot < slot:
        sched = realign(sched, window_drift(sched))
    return sched


def schedule_tx_slot(current_slot: int, bounds: TxDelayBound, sched: SlotSchedule) -> int:
    """Target slot for a transmission decided at the detection of slot ``current_slot``."""
    if bounds.one_slot_ahead:
        return current_slot + 1
    ready = sched.boundary(current_slot) + as_time(bounds.delta_bound) + as_time(bounds.phi_bound)
    k = current_slot
    while sched.boundary(k) < ready:
        k += 1
    return k


def check_sync_loss(slots_since_last_ref: int, tx_gap: int) -> bool:
    """True when more than ten reference periods passed without a reference packet."""
    if tx_gap < 1:
        raise ParameterError("tx_gap threshold must be at least 1")
    return slots_since_last_ref > 10 * tx_gap
