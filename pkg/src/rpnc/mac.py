"""Time-slotted FDD MAC for the two end nodes and the relay.

The classes here are plain state machines. The simulators decide when a
slot boundary is detected, when a packet finishes decoding and whether a
reception survived the channel, and call into these handlers.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction

from .errors import FormatError
from .linkcodec import (
    DATA_SIZE,
    DownlinkKind,
    LinkHeader,
    classify_raw,
    decode_packet,
    encode_beacon,
    encode_packet,
    peek_slot_ids,
    verify_xor_packet,
    xor_bytes,
)
from .roles import Role
from .slot_timing import (
    ArrivalRecord,
    SlotSchedule,
    TxDelayBound,
    check_sync_loss,
    init_boundaries,
    realign,
    record_arrival,
    schedule_tx_slot,
    window_drift,
)

SLOT_ID_SPACE = 255


class RxState(str, Enum):
    INIT = "INIT"
    SYNC = "SYNC"


class UplinkKind(str, Enum):
    NONE = "none"
    A = "A"
    B = "B"
    XOR = "xor"


@dataclass(frozen=True)
class Transmission:
    slot: int
    raw: bytes


@dataclass(frozen=True)
class SlotStep:
    """Outcome of processing one detected slot boundary at an end node."""

    slot: int
    reference: bool
    realigned_by: int | None = None
    lost_sync: bool = False


@dataclass
class DownlinkResult:
    kind: DownlinkKind | None
    crc_ok: bool
    delivered: tuple[LinkHeader, bytes] | None = None


def reference_period(tx_gap: int) -> int:
    """Slots between consecutive reference packets when ``tx_gap`` empty slots separate them."""
    return tx_gap + 1


@dataclass
class EndNodeMac:
    role: Role
    slot_duration: Fraction
    sample_period: Fraction
    window: int = 10
    tx_gap: int = 0
    realign_enabled: bool = True
    bounds: TxDelayBound = field(default_factory=TxDelayBound)
    data_size: int = DATA_SIZE
    rx_state: RxState = RxState.INIT
    sched: SlotSchedule | None = None
    tx_que_pkt: deque = field(default_factory=deque)
    tx_que_sample: deque = field(default_factory=deque)
    rx_que_pkt: deque = field(default_factory=deque)
    slots_since_ref: int = 0
    sync_losses: int = 0
    adjustments: list = field(default_factory=list)

    def __post_init__(self):
        self.role = Role(self.role)
        if self.role is Role.RELAY:
            raise ValueError("end-node MAC needs role A or B")
        self._ring: dict[int, bytes] = {}
        self._next_slot_id = 1

    # transmit side

    def build_uplink(self, header: LinkHeader, payload: bytes) -> bytes:
        """Encode a packet, stamping a fresh nonzero slot ID in this node's byte only."""
        sid = self._next_slot_id
        self._next_slot_id = sid % SLOT_ID_SPACE + 1
        if self.role is Role.A:
            header = replace(header, slot_id_a=sid, slot_id_b=0)
        else:
            header = replace(header, slot_id_a=0, slot_id_b=sid)
        raw = encode_packet(header, payload, self.data_size)
        self._ring[sid] = raw
        return raw

    def own_packet(self, slot_id: int) -> bytes | None:
        return self._ring.get(slot_id)

    def endnode_on_slot_detect(self, n: int) -> Transmission | None:
        """One-slot-ahead: hand the head of TxQueSample to the slot after the detected one."""
        if self.rx_state is not RxState.SYNC or not self.tx_que_sample:
            return None
        raw = self.tx_que_sample.popleft()
        return Transmission(schedule_tx_slot(n, self.bounds, self.sched), raw)

    # receive side

    def acquire(self, arrival_time) -> None:
        """First reference packet found by the full search: anchor slot 0 on it and enter SYNC."""
        self.sched = init_boundaries(arrival_time, self.slot_duration, self.sample_period, self.window)
        self.rx_state = RxState.SYNC
        self.slots_since_ref = 0

    def endnode_rx_flowchart_step(self, n: int, arrival_time=None) -> SlotStep:
        """Bookkeeping at the detection of slot n in SYNC state.

        ``arrival_time`` is the sample-counted arrival of a reference packet
        found by the narrow search at this boundary, or None on a miss.
        """
        if self.rx_state is not RxState.SYNC:
            return SlotStep(n, False)
        if n < self.sched.window_first_slot:
            raise FormatError(f"slot {n} precedes the current window")
        while n > self.sched.trigger_slot:
            self._close_window()

        reference = arrival_time is not None
        if reference:
            self.sched = record_arrival(self.sched, ArrivalRecord(n, arrival_time))
            self.slots_since_ref = 0
        else:
            self.slots_since_ref += 1

        shift = None
        if n == self.sched.trigger_slot:
            shift = self._close_window()

        if not reference and check_sync_loss(self.slots_since_ref, max(self.tx_gap, 1)):
            self.rx_state = RxState.INIT
            self.sync_losses += 1
            return SlotStep(n, False, shift, lost_sync=True)
        return SlotStep(n, reference, shift)

    def _close_window(self) -> int:
        delta = window_drift(self.sched) if self.realign_enabled else 0
        trigger = self.sched.trigger_slot
        self.sched = realign(self.sched, delta, trigger)
        self.adjustments.append((trigger, delta))
        return delta

    def endnode_on_downlink(self, raw: bytes) -> DownlinkResult:
        """Classify a decoded downlink image and recover any payload meant for this node."""
        kind = classify_raw(raw, self.role)
        if kind is DownlinkKind.XOR:
            if not verify_xor_packet(raw, self.data_size):
                return DownlinkResult(kind, False)
            mine = peek_slot_ids(raw)[0 if self.role is Role.A else 1]
            own = self._ring.get(mine)
            if own is None:
                return DownlinkResult(kind, True)
            decoded = decode_packet(xor_bytes(raw, own), self.data_size)
            if not decoded.crc_ok:
                return DownlinkResult(kind, False)
            self.rx_que_pkt.append((decoded.header, decoded.payload))
            return DownlinkResult(kind, True, (decoded.header, decoded.payload))

        decoded = decode_packet(raw, self.data_size)
        if not decoded.crc_ok:
            return DownlinkResult(kind, False)
        if kind is DownlinkKind.FROM_OTHER:
            self.rx_que_pkt.append((decoded.header, decoded.payload))
            return DownlinkResult(kind, True, (decoded.header, decoded.payload))
        return DownlinkResult(kind, True)


@dataclass
class RelayMac:
    tx_gap: int = 0
    data_size: int = DATA_SIZE
    forward_queue: deque = field(default_factory=deque)
    last_emit_slot: int | None = None
    forwarded: int = 0
    beacons: int = 0
    dropped: int = 0
    xor_received: int = 0
    single_received: int = 0

    def relay_on_uplink(self, kind: UplinkKind, raw: bytes | None) -> bool:
        """Queue a decoded uplink reception for forwarding if its CRC check passes."""
        if kind is UplinkKind.NONE or raw is None:
            return False
        if kind is UplinkKind.XOR:
            ok = verify_xor_packet(raw, self.data_size)
            self.xor_received += ok
        else:
            ok = decode_packet(raw, self.data_size).crc_ok
            self.single_received += ok
        if ok:
            self.forward_queue.append(raw)
        else:
            self.dropped += 1
        return ok

    def relay_on_slot(self, m: int) -> tuple[Transmission, bool] | None:
        """Decide the downlink emission for slot m + 1 at the detection of slot m.

        Returns the transmission and whether it is a beacon.
        """
        target = m + 1
        if self.forward_queue:
            raw = self.forward_queue.popleft()
            self.forwarded += 1
            beacon = False
        else:
            empty = target if self.last_emit_slot is None else target - self.last_emit_slot - 1
            if self.last_emit_slot is not None and empty < self.tx_gap:
                return None
            raw = encode_beacon(self.data_size)
            self.beacons += 1
            beacon = True
        self.last_emit_slot = target
        return Transmission(target, raw), beacon


def superpose_packets(raw_a: bytes, raw_b: bytes) -> bytes:
    """Bit-level outcome of decoding two simultaneous uplink packets as one XOR packet.

    All regions combine by XOR except the two slot-ID bytes, which each
    carry only one node's value.
    """
    out = bytearray(xor_bytes(raw_a, raw_b))
    out[0] = raw_a[0]
    out[1] = raw_b[1]
    return bytes(out)
