from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError, RangeError


@dataclass(frozen=True)
class OfdmParams:
    """Numerology shared by every node.

    The 2STS field (CP plus two short training symbols) lasts exactly one
    OFDM symbol, so ``2 * sts_len == n_subcarriers``.
    """

    n_subcarriers: int = 64
    cp_len: int = 32
    sts_len: int = 32
    bandwidth: float = 5e6

    def __post_init__(self):
        for name in ("n_subcarriers", "cp_len", "sts_len"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive")
        if self.bandwidth <= 0:
            raise ParameterError("bandwidth must be positive")
        if self.cp_len >= self.n_subcarriers:
            raise ParameterError("cyclic prefix must be shorter than the OFDM symbol body")
        if 2 * self.sts_len != self.n_subcarriers:
            raise ParameterError("2STS field must last one OFDM symbol: need 2*sts_len == n_subcarriers")

    @property
    def symbol_len(self) -> int:
        return self.n_subcarriers + self.cp_len

    @property
    def sample_period(self) -> float:
        return 1.0 / self.bandwidth


@dataclass
class SampleStream:
    """Complex baseband samples anchored at an absolute hardware tick."""

    samples: np.ndarray
    origin_tick: int = 0

    def __post_init__(self):
        if self.origin_tick < 0:
            raise ParameterError("origin_tick must be non-negative")
        self.samples = np.asarray(self.samples, dtype=np.complex128)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def end_tick(self) -> int:
        return self.origin_tick + len(self.samples)

    def window(self, tick: int, length: int) -> np.ndarray:
        off = tick - self.origin_tick
        if off < 0 or length < 0 or off + length > len(self.samples):
            raise RangeError(f"window [{tick}, {tick + length}) outside stream [{self.origin_tick}, {self.end_tick})")
        return self.samples[off:off + length]


@dataclass
class CorrelatorCost:
    """Running operation counter owned by the caller."""

    complex_multiplies: int = 0
    complex_adds: int = 0
    cross_multiplies: int = 0
    cross_invocations: int = 0

    def add_cross(self, positions: int, seq_len: int) -> None:
        self.complex_multiplies += positions * seq_len
        self.complex_adds += positions * (seq_len - 1)
        self.cross_multiplies += positions * seq_len
        self.cross_invocations += 1

    def add(self, multiplies: int, adds: int) -> None:
        self.complex_multiplies += multiplies
        self.complex_adds += adds

    def merge(self, other: "CorrelatorCost") -> None:
        self.complex_multiplies += other.complex_multiplies
        self.complex_adds += other.complex_adds
        self.cross_multiplies += other.cross_multiplies
        self.cross_invocations += other.cross_invocations
