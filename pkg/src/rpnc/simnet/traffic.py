"""Synthetic applications standing in for UDP and TCP-like transfers.

Every application payload starts with a 13-byte tag::

    u32 index | u8 kind | u64 send time in ns      (big-endian)

followed by filler bytes that are a deterministic function of the index,
so the sink can check integrity without keeping copies.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

_TAG = struct.Struct(">IBQ")
TAG_SIZE = _TAG.size


class PayloadKind(IntEnum):
    DATA = 0
    ECHO_REQUEST = 1
    ECHO_REPLY = 2


@dataclass(frozen=True)
class AppPayload:
    index: int
    kind: PayloadKind
    sent_ns: int


class PayloadFactory:
    def __init__(self, size: int, rng: np.random.Generator):
        if size < TAG_SIZE:
            raise ValueError(f"payload size must be at least {TAG_SIZE} bytes")
        self.size = size
        self._pattern = rng.bytes(4096 + size)

    def _filler(self, index: int) -> bytes:
        off = (index * 131) % 4096
        return self._pattern[off:off + self.size - TAG_SIZE]

    def make(self, index: int, kind: PayloadKind = PayloadKind.DATA, sent_ns: int = 0) -> bytes:
        return _TAG.pack(index & 0xFFFFFFFF, int(kind), sent_ns) + self._filler(index)

    def parse(self, payload: bytes) -> tuple[AppPayload, bool]:
        """Tag plus an integrity flag (filler matches and length is right)."""
        if len(payload) < TAG_SIZE:
            return AppPayload(-1, PayloadKind.DATA, 0), False
        index, kind, sent = _TAG.unpack_from(payload)
        ok = len(payload) == self.size and payload[TAG_SIZE:] == self._filler(index)
        return AppPayload(index, PayloadKind(kind), sent), ok


@dataclass
class AppSink:
    """Receiving application: counts, ordering and integrity."""

    ordered: bool = False
    delivered: int = 0
    delivered_bytes: int = 0
    integrity_errors: int = 0
    order_errors: int = 0
    last_index: int = -1
    times_ns: list[int] = field(default_factory=list)

    def accept(self, app: AppPayload, ok: bool, size: int, now_ns: int) -> None:
        self.delivered += 1
        self.delivered_bytes += size
        self.times_ns.append(now_ns)
        if not ok:
            self.integrity_errors += 1
        if self.ordered and app.index != self.last_index + 1:
            self.order_errors += 1
        self.last_index = max(self.last_index, app.index)
