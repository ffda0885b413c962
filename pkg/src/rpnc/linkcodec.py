"""Link-layer packet codec, CRC-32 and XOR-packet error detection.

Packet image (all multi-byte fields big-endian unless noted)::

    offset  size  field
    0       1     slot ID of node A (0 = no A packet inside)
    1       1     slot ID of node B (0 = no B packet inside)
    2       2     data length, low 11 bits; upper 5 bits zero
    4       1     reserved (0)
    5       1     flags: bit0 SEQ, bit1 ACK, bit2 SACK present,
                  bits6-7 number of SACK blocks minus one
    6       1     sequence number
    7       1     acknowledgement number
    8       8     four SACK blocks of (start seq, length); unused blocks zero
    16      D     data section, zero padded to the fixed size D
    16+D    4     CRC-32 over bytes [0, 16+D), little-endian

A beacon is an image whose header and data bytes are all zero.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import NamedTuple

from .errors import FormatError
from .roles import Role

HEADER_SIZE = 16
CRC_SIZE = 4
DATA_SIZE = 1516
MAX_DATA_LEN = (1 << 11) - 1
MAX_SACK_BLOCKS = 4

_FLAG_SEQ = 0x01
_FLAG_ACK = 0x02
_FLAG_SACK = 0x04


@dataclass(frozen=True)
class SackBlock:
    start_seq: int
    length: int

    def __post_init__(self):
        if not 0 <= self.start_seq <= 0xFF:
            raise FormatError(f"SACK start {self.start_seq} does not fit a byte")
        if not 1 <= self.length <= 0xFF:
            raise FormatError(f"SACK length {self.length} outside [1, 255]")


@dataclass(frozen=True)
class LinkHeader:
    slot_id_a: int = 0
    slot_id_b: int = 0
    data_len: int = 0
    seq_flag: bool = False
    ack_flag: bool = False
    seq_no: int = 0
    ack_no: int = 0
    sack_blocks: tuple[SackBlock, ...] = field(default_factory=tuple)

    @property
    def sack_count(self) -> int:
        return len(self.sack_blocks)

    def slot_id(self, role: Role) -> int:
        return self.slot_id_a if role is Role.A else self.slot_id_b


class DownlinkKind(str, Enum):
    XOR = "xor"
    FROM_OTHER = "from_other"
    SELF_ECHO = "self_echo"
    BEACON = "beacon"


class Decoded(NamedTuple):
    header: LinkHeader | None
    payload: bytes
    crc_ok: bool


def packet_size(data_size: int = DATA_SIZE) -> int:
    return HEADER_SIZE + data_size + CRC_SIZE


def crc32_dot11(data: bytes) -> int:
    """IEEE 802.11 frame check sequence (preset register, reflected, complemented)."""
    return zlib.crc32(data) & 0xFFFFFFFF


@lru_cache(maxsize=64)
def _zero_crc(length: int) -> int:
    return crc32_dot11(bytes(length))


def crc32_remainder(data: bytes) -> int:
    """x^32 * P(x) mod G(x) with no register preset and no final complement.

    The 802.11 CRC is affine in the message: the preset and complement add a
    term that depends only on the length, which is exactly the CRC of an
    all-zero message of the same length. Cancelling it leaves the plain
    polynomial remainder.
    """
    return crc32_dot11(data) ^ _zero_crc(len(data))


def verify_xor_crc(covered: bytes, crc_rx: int, expected_len: int | None = HEADER_SIZE + DATA_SIZE) -> bool:
    """Check an XOR-decoded packet against the XOR of the two senders' CRCs.

    Both senders include the preset and complement, and those cancel under
    XOR, so the relay compares against the bare remainder of the XOR bytes.
    """
    if expected_len is not None and len(covered) != expected_len:
        raise FormatError(f"XOR payload is {len(covered)} bytes, expected {expected_len}")
    return crc32_remainder(covered) == (crc_rx & 0xFFFFFFFF)


def split_crc(raw: bytes) -> tuple[bytes, int]:
    return raw[:-CRC_SIZE], int.from_bytes(raw[-CRC_SIZE:], "little")


def verify_xor_packet(raw: bytes, data_size: int = DATA_SIZE) -> bool:
    if len(raw) != packet_size(data_size):
        raise FormatError(f"packet is {len(raw)} bytes, expected {packet_size(data_size)}")
    covered, crc = split_crc(raw)
    return verify_xor_crc(covered, crc, expected_len=None)


def _pack_header(h: LinkHeader, data_len: int | None = None) -> bytes:
    for name in ("slot_id_a", "slot_id_b", "seq_no", "ack_no"):
        value = getattr(h, name)
        if not 0 <= value <= 0xFF:
            raise FormatError(f"{name}={value} does not fit a byte")
    data_len = h.data_len if data_len is None else data_len
    if not 0 <= data_len <= MAX_DATA_LEN:
        raise FormatError(f"data length {data_len} does not fit 11 bits")
    if len(h.sack_blocks) > MAX_SACK_BLOCKS:
        raise FormatError(f"{len(h.sack_blocks)} SACK blocks, at most {MAX_SACK_BLOCKS} allowed")

    flags = 0
    if h.seq_flag:
        flags |= _FLAG_SEQ
    if h.ack_flag:
        flags |= _FLAG_ACK
    if h.sack_blocks:
        flags |= _FLAG_SACK | ((len(h.sack_blocks) - 1) << 6)

    out = bytearray(HEADER_SIZE)
    out[0] = h.slot_id_a
    out[1] = h.slot_id_b
    out[2:4] = data_len.to_bytes(2, "big")
    out[5] = flags
    out[6] = h.seq_no
    out[7] = h.ack_no
    for i, blk in enumerate(h.sack_blocks):
        out[8 + 2 * i] = blk.start_seq
        out[9 + 2 * i] = blk.length
    return bytes(out)


def parse_header(raw: bytes) -> LinkHeader:
    if len(raw) < HEADER_SIZE:
        raise FormatError(f"header needs {HEADER_SIZE} bytes, got {len(raw)}")
    word = int.from_bytes(raw[2:4], "big")
    if word > MAX_DATA_LEN:
        raise FormatError("reserved data-length bits are set")
    flags = raw[5]
    blocks: tuple[SackBlock, ...] = ()
    if flags & _FLAG_SACK:
        n = (flags >> 6) + 1
        blocks = tuple(SackBlock(raw[8 + 2 * i], raw[9 + 2 * i]) for i in range(n))
    return LinkHeader(
        slot_id_a=raw[0],
        slot_id_b=raw[1],
        data_len=word,
        seq_flag=bool(flags & _FLAG_SEQ),
        ack_flag=bool(flags & _FLAG_ACK),
        seq_no=raw[6],
        ack_no=raw[7],
        sack_blocks=blocks,
    )


def peek_slot_ids(raw: bytes) -> tuple[int, int]:
    """Slot-ID bytes of a packet image; valid even for XOR-combined images."""
    return raw[0], raw[1]


def encode_packet(header: LinkHeader, payload: bytes, data_size: int = DATA_SIZE) -> bytes:
    """Serialize header and payload; the header's data_len is set from the payload."""
    if data_size > MAX_DATA_LEN:
        raise FormatError(f"data section of {data_size} bytes cannot be described in 11 bits")
    if len(payload) > data_size:
        raise FormatError(f"payload of {len(payload)} bytes exceeds data section of {data_size}")
    covered = _pack_header(header, len(payload)) + bytes(payload) + bytes(data_size - len(payload))
    return covered + crc32_dot11(covered).to_bytes(CRC_SIZE, "little")


def encode_beacon(data_size: int = DATA_SIZE) -> bytes:
    return encode_packet(LinkHeader(), b"", data_size)


def decode_packet(raw: bytes, data_size: int = DATA_SIZE) -> Decoded:
    """Parse a packet image and check its CRC.

    Fields of an image that fails the CRC are still returned when they are
    well formed; if they are not, the result has ``header=None`` and an
    empty payload instead of raising, since the damage is expected.
    """
    if len(raw) != packet_size(data_size):
        raise FormatError(f"packet is {len(raw)} bytes, expected {packet_size(data_size)}")
    covered, crc = split_crc(raw)
    ok = crc32_dot11(covered) == crc
    try:
        header = parse_header(covered)
        if header.data_len > data_size:
            raise FormatError(f"data length {header.data_len} exceeds data section of {data_size}")
    except FormatError:
        if ok:
            raise
        return Decoded(None, b"", False)
    payload = covered[HEADER_SIZE:HEADER_SIZE + header.data_len]
    return Decoded(header, payload, ok)


def classify_downlink(header: LinkHeader, my_role: Role) -> DownlinkKind:
    mine = header.slot_id(my_role)
    other = header.slot_id(my_role.other)
    if mine and other:
        return DownlinkKind.XOR
    if other:
        return DownlinkKind.FROM_OTHER
    if mine:
        return DownlinkKind.SELF_ECHO
    return DownlinkKind.BEACON


def classify_raw(raw: bytes, my_role: Role) -> DownlinkKind:
    a, b = peek_slot_ids(raw)
    return classify_downlink(LinkHeader(slot_id_a=a, slot_id_b=b), my_role)


def xor_bytes(x: bytes, y: bytes) -> bytes:
    if len(x) != len(y):
        raise FormatError(f"cannot XOR {len(x)} bytes with {len(y)} bytes")
    n = len(x)
    return (int.from_bytes(x, "little") ^ int.from_bytes(y, "little")).to_bytes(n, "little")


def xor_extract(xor_payload: bytes, own_payload: bytes) -> bytes:
    """Recover the peer's packet from an XOR packet and our own copy."""
    return xor_bytes(xor_payload, own_payload)


def hexdump(raw: bytes, width: int = 16) -> str:
    lines = []
    for off in range(0, len(raw), width):
        chunk = raw[off:off + width]
        lines.append(f"{off:04x}: " + " ".join(f"{b:02x}" for b in chunk))
    return "\n".join(lines) + "\n"


def parse_hexdump(text: str) -> bytes:
    out = bytearray()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        _, _, body = line.partition(":")
        out.extend(bytes.fromhex(body))
    return bytes(out)
