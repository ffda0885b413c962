from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from ..slot_timing import as_time

PS = 10**12


@dataclass(frozen=True)
class HardwareClock:
    """Sample clock of one radio.

    The radio's first sample is taken at true time ``t0``; afterwards it
    ticks at ``nominal_rate * (1 + drift_ppm * 1e-6)``. The host only knows
    the nominal rate, so it reads tick k as hardware time t0 + k / B.
    All conversions are exact rational arithmetic.
    """

    t0: Fraction
    nominal_rate: Fraction
    drift_ppm: Fraction = Fraction(0)
    owner: str = ""

    def __post_init__(self):
        object.__setattr__(self, "t0", as_time(self.t0))
        object.__setattr__(self, "nominal_rate", as_time(self.nominal_rate))
        object.__setattr__(self, "drift_ppm", as_time(self.drift_ppm))
        rate = self.nominal_rate * (1 + self.drift_ppm / 1_000_000)
        object.__setattr__(self, "_true_rate", rate)
        object.__setattr__(self, "_t0_ps", round(self.t0 * PS))
        object.__setattr__(self, "_rate_num", rate.numerator)
        object.__setattr__(self, "_rate_den", rate.denominator)

    @property
    def true_rate(self) -> Fraction:
        return self._true_rate

    def ticks_at(self, t) -> Fraction:
        """Exact (fractional) number of sample periods elapsed at true time t."""
        return (as_time(t) - self.t0) * self.true_rate

    def tick_at(self, t) -> int:
        """Index of the latest sample taken at or before true time t."""
        return math.floor(self.ticks_at(t))

    def true_time_of_tick(self, tick) -> Fraction:
        return self.t0 + as_time(tick) / self.true_rate

    def hw_time_of_tick(self, tick) -> Fraction:
        return self.t0 + as_time(tick) / self.nominal_rate

    def tick_of_hw_time(self, hw) -> Fraction:
        return (as_time(hw) - self.t0) * self.nominal_rate

    def true_time_of_hw(self, hw) -> Fraction:
        """True time at which this radio's hardware time reads ``hw``."""
        return self.true_time_of_tick(self.tick_of_hw_time(hw))

    def hw_time_at(self, t) -> Fraction:
        """Hardware time the host would assign (by sample counting) to the sample at true time t."""
        return self.hw_time_of_tick(self.tick_at(t))

    # Integer picosecond views used by the event simulator; true times are
    # rounded to the nearest picosecond, tick arithmetic stays exact.

    @property
    def t0_ps(self) -> int:
        return self._t0_ps

    def true_ps_of_tick(self, tick: int) -> int:
        """True time (ps, rounded) of sample ``tick``."""
        num = tick * PS * self._rate_den
        return self._t0_ps + (2 * num + self._rate_num) // (2 * self._rate_num)

    def tick_at_ps(self, t_ps: int) -> int:
        """Index of the latest sample taken at or before true time ``t_ps``."""
        return ((t_ps - self._t0_ps) * self._rate_num) // (self._rate_den * PS)

    def ticks_at_ps(self, t_ps: int) -> tuple[int, int]:
        """Exact fractional tick count at ``t_ps`` as (numerator, denominator)."""
        return (t_ps - self._t0_ps) * self._rate_num, self._rate_den * PS
