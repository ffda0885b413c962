"""Channel and host-latency models."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..baseband import SampleStream, apply_taps, awgn, place, rayleigh_taps
from ..mac import UplinkKind, superpose_packets
from .config import ChannelConfig, LatencyConfig


class Fidelity(str, Enum):
    SAMPLE = "sample"
    PACKET = "packet"


class PerMode(str, Enum):
    SINGLE = "single"
    XOR = "xor"


@dataclass(frozen=True)
class PerCurve:
    """Logistic packet-error curve; the XOR decoder needs ``xor_penalty_db`` more SNR.

    These defaults are configuration, not measured hardware behaviour.
    """

    midpoint_db: float = 6.0
    slope_per_db: float = 1.2
    xor_penalty_db: float = 2.0

    def per(self, mode: PerMode, snr_db: float) -> float:
        shift = self.xor_penalty_db if mode is PerMode.XOR else 0.0
        x = self.slope_per_db * (snr_db - self.midpoint_db - shift)
        if x > 700:
            return 0.0
        return 1.0 / (1.0 + math.exp(x))


class ChannelModel:
    """Packet-level erasure model for both FDD bands."""

    def __init__(self, cfg: ChannelConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.curve = PerCurve(cfg.per_midpoint_db, cfg.per_slope_per_db, cfg.xor_penalty_db)
        self.rng = rng

    def uplink_per(self, mode: PerMode) -> float:
        if self.cfg.per_uplink is not None:
            return self.cfg.per_uplink
        return self.curve.per(mode, self.cfg.snr_db)

    def downlink_per(self) -> float:
        if self.cfg.per_downlink is not None:
            return self.cfg.per_downlink
        return self.curve.per(PerMode.SINGLE, self.cfg.snr_db)

    def erased(self, per: float) -> bool:
        return bool(self.rng.random() < per)

    def corrupt(self, raw: bytes) -> bytes:
        """Flip one random bit so that the receiver's CRC check rejects the image."""
        bit = int(self.rng.integers(0, 8 * len(raw)))
        out = bytearray(raw)
        out[bit // 8] ^= 1 << (bit % 8)
        return bytes(out)


def packet_level_uplink(raw_a: bytes | None, raw_b: bytes | None, ch: ChannelModel) -> tuple[UplinkKind, bytes | None, bool]:
    """Relay reception of whatever the end nodes sent in one uplink slot.

    Returns the reception kind, the image handed to the decoder (bit-flipped
    when the channel erased it) and the erasure flag.
    """
    if raw_a is not None and raw_b is not None:
        kind, raw, mode = UplinkKind.XOR, superpose_packets(raw_a, raw_b), PerMode.XOR
    elif raw_a is not None:
        kind, raw, mode = UplinkKind.A, raw_a, PerMode.SINGLE
    elif raw_b is not None:
        kind, raw, mode = UplinkKind.B, raw_b, PerMode.SINGLE
    else:
        return UplinkKind.NONE, None, False
    if ch.erased(ch.uplink_per(mode)):
        return kind, ch.corrupt(raw), True
    return kind, raw, False


class LatencyModel:
    """Host latencies: delta (radio to host) and phi (host to radio), with delta + phi < T_s."""

    def __init__(self, cfg: LatencyConfig, slot_duration: float, rng: np.random.Generator, batch: int = 512):
        self.cfg = cfg
        self.slot_duration = slot_duration
        self.rng = rng
        self.batch = batch
        self._buf: list[tuple[float, float]] = []

    def _fill(self) -> None:
        c = self.cfg
        for _ in range(1000):
            d = self.rng.uniform(c.delta_min, c.delta_max, self.batch)
            p = self.rng.uniform(c.phi_min, c.phi_max, self.batch)
            ok = d + p < self.slot_duration
            if ok.any():
                # reversed so that pop() returns draws in generation order
                self._buf = list(zip(d[ok].tolist(), p[ok].tolist()))[::-1]
                return
        raise RuntimeError("latency bounds leave no room inside a slot")

    def draw(self) -> tuple[float, float]:
        if not self._buf:
            self._fill()
        return self._buf.pop()


def user_taps(cfg: ChannelConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.fading:
        return rayleigh_taps(rng, np.asarray(cfg.taps_db))
    p = 10 ** (np.asarray(cfg.taps_db, dtype=float) / 10)
    return np.sqrt(p / p.sum()).astype(np.complex128)


def superpose_uplink(
    length: int,
    users: list[tuple[np.ndarray, float, np.ndarray]],
    snr_db: float | None,
    rng: np.random.Generator,
    origin_tick: int = 0,
) -> SampleStream:
    """Relay-side reception: each user's samples, placed at its (fractional) offset
    within the window and passed through its own taps, summed, plus AWGN."""
    y = np.zeros(length, dtype=np.complex128)
    for samples, at, taps in users:
        y += apply_taps(place(length, samples, at), taps)
    if snr_db is not None:
        y += awgn(rng, length, snr_db)
    return SampleStream(y, origin_tick)
