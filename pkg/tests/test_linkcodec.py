import os
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import crc32_bitserial, poly_mod_remainder
from rpnc.errors import FormatError
from rpnc.linkcodec import (
    DATA_SIZE,
    HEADER_SIZE,
    DownlinkKind,
    LinkHeader,
    SackBlock,
    classify_downlink,
    classify_raw,
    crc32_dot11,
    crc32_remainder,
    decode_packet,
    encode_beacon,
    encode_packet,
    packet_size,
    parse_hexdump,
    split_crc,
    verify_xor_crc,
    verify_xor_packet,
    xor_bytes,
    xor_extract,
)
from rpnc.mac import superpose_packets
from rpnc.roles import Role

DATA = Path(__file__).parent / "data"


class TestCrc:
    def test_check_value(self):
        assert crc32_dot11(b"123456789") == 0xCBF43926
        assert crc32_bitserial(b"123456789") == 0xCBF43926

    def test_empty_is_complemented_preset(self):
        assert crc32_dot11(b"") == crc32_bitserial(b"") == 0xFFFFFFFF ^ 0xFFFFFFFF

    def test_matches_bitserial_oracle(self):
        rng = random.Random(11)
        for _ in range(300):
            data = bytes(rng.getrandbits(8) for _ in range(rng.randrange(0, 64)))
            assert crc32_dot11(data) == crc32_bitserial(data)

    def test_remainder_matches_long_division(self):
        rng = random.Random(12)
        for _ in range(200):
            data = bytes(rng.getrandbits(8) for _ in range(rng.randrange(0, 48)))
            assert crc32_remainder(data) == poly_mod_remainder(data)

    def test_single_bit_flip_changes_crc(self):
        rng = random.Random(13)
        payload = bytearray(os.urandom(1000))
        ref = crc32_dot11(bytes(payload))
        for _ in range(10_000):
            bit = rng.randrange(8000)
            payload[bit // 8] ^= 1 << (bit % 8)
            assert crc32_dot11(bytes(payload)) != ref
            payload[bit // 8] ^= 1 << (bit % 8)


class TestXorCrc:
    def test_identity_on_random_pairs(self):
        rng = random.Random(21)
        n = HEADER_SIZE + DATA_SIZE
        for _ in range(100):
            pa = rng.randbytes(n)
            pb = rng.randbytes(n)
            assert verify_xor_crc(xor_bytes(pa, pb), crc32_dot11(pa) ^ crc32_dot11(pb))

    def test_equal_payloads_cancel(self):
        n = HEADER_SIZE + DATA_SIZE
        assert verify_xor_crc(bytes(n), 0)

    def test_bit_flip_detected(self):
        rng = random.Random(22)
        n = HEADER_SIZE + DATA_SIZE
        for _ in range(100):
            pa, pb = rng.randbytes(n), rng.randbytes(n)
            x = bytearray(xor_bytes(pa, pb))
            bit = rng.randrange(8 * n)
            x[bit // 8] ^= 1 << (bit % 8)
            assert not verify_xor_crc(bytes(x), crc32_dot11(pa) ^ crc32_dot11(pb))

    def test_crc_field_bit_flip_detected(self):
        rng = random.Random(23)
        n = HEADER_SIZE + DATA_SIZE
        pa, pb = rng.randbytes(n), rng.randbytes(n)
        crc = crc32_dot11(pa) ^ crc32_dot11(pb)
        for bit in range(32):
            assert not verify_xor_crc(xor_bytes(pa, pb), crc ^ (1 << bit))

    def test_standard_crc_would_reject_xor_packet(self):
        pa, pb = b"\x01" * 32, b"\x80" * 32
        x = xor_bytes(pa, pb)
        assert crc32_dot11(x) != crc32_dot11(pa) ^ crc32_dot11(pb)

    def test_wrong_length(self):
        with pytest.raises(FormatError):
            verify_xor_crc(b"\x00" * 10, 0)

    def test_superposed_packets_verify(self):
        pa = encode_packet(LinkHeader(slot_id_a=3, seq_flag=True, seq_no=1), b"abc")
        pb = encode_packet(LinkHeader(slot_id_b=4, seq_flag=True, seq_no=2), b"defgh")
        assert verify_xor_packet(superpose_packets(pa, pb))


class TestLayout:
    def test_header_bytes(self):
        h = LinkHeader(slot_id_a=0x12, slot_id_b=0, data_len=0, seq_flag=True, ack_flag=True,
                       seq_no=0x34, ack_no=0x56, sack_blocks=(SackBlock(0x60, 2), SackBlock(0x70, 5)))
        raw = encode_packet(h, b"\xAA" * 0x123)
        assert raw[0] == 0x12 and raw[1] == 0
        assert raw[2:4] == bytes([0x01, 0x23])
        assert raw[4] == 0
        assert raw[5] == 0x01 | 0x02 | 0x04 | (1 << 6)
        assert raw[6:8] == bytes([0x34, 0x56])
        assert raw[8:16] == bytes([0x60, 2, 0x70, 5, 0, 0, 0, 0])
        assert raw[16:16 + 0x123] == b"\xAA" * 0x123
        assert raw[16 + 0x123:16 + DATA_SIZE] == bytes(DATA_SIZE - 0x123)
        covered, crc = split_crc(raw)
        assert crc == crc32_dot11(covered)
        assert raw[-4:] == crc.to_bytes(4, "little")

    def test_total_size(self):
        assert packet_size() == 16 + 1516 + 4 == 1536

    def test_four_sack_blocks(self):
        blocks = tuple(SackBlock(10 * i, i + 1) for i in range(4))
        raw = encode_packet(LinkHeader(ack_flag=True, sack_blocks=blocks), b"")
        assert raw[5] >> 6 == 3
        assert decode_packet(raw).header.sack_blocks == blocks

    def test_too_many_sack_blocks(self):
        blocks = tuple(SackBlock(i, 1) for i in range(5))
        with pytest.raises(FormatError):
            encode_packet(LinkHeader(sack_blocks=blocks), b"")

    @pytest.mark.parametrize("name", ["packet_a.hex", "packet_b.hex", "packet_xor.hex", "beacon.hex"])
    def test_golden_hexdumps(self, name):
        import importlib.util

        spec = importlib.util.spec_from_file_location("regenerate", DATA / "regenerate.py")
        regen = importlib.util.module_from_spec(spec)
        spec.loader.exec_module(regen)
        expected = parse_hexdump((DATA / name).read_text())
        assert regen.golden_packets()[name] == expected

    def test_golden_xor_packet_decodes_at_each_end(self):
        size = 64
        pa = parse_hexdump((DATA / "packet_a.hex").read_text())
        pb = parse_hexdump((DATA / "packet_b.hex").read_text())
        px = parse_hexdump((DATA / "packet_xor.hex").read_text())
        assert verify_xor_packet(px, size)
        assert classify_raw(px, Role.A) is DownlinkKind.XOR
        got_b = decode_packet(xor_bytes(px, pa), size)
        assert got_b.crc_ok and got_b.payload == decode_packet(pb, size).payload


header_strategy = st.builds(
    LinkHeader,
    slot_id_a=st.integers(0, 255),
    slot_id_b=st.integers(0, 255),
    seq_flag=st.booleans(),
    ack_flag=st.booleans(),
    seq_no=st.integers(0, 255),
    ack_no=st.integers(0, 255),
    sack_blocks=st.lists(st.builds(SackBlock, st.integers(0, 255), st.integers(1, 255)), max_size=4).map(tuple),
)


class TestCodec:
    @settings(max_examples=300, deadline=None)
    @given(header_strategy, st.binary(max_size=200))
    def test_round_trip(self, header, payload):
        raw = encode_packet(header, payload, 200)
        assert len(raw) == 16 + 200 + 4
        dec = decode_packet(raw, 200)
        assert dec.crc_ok
        assert dec.payload == payload
        assert dec.header == LinkHeader(**{**header.__dict__, "data_len": len(payload)})

    def test_corrupted_crc_byte_still_parses(self):
        h = LinkHeader(slot_id_a=7, seq_flag=True, seq_no=3)
        raw = bytearray(encode_packet(h, b"hello"))
        raw[-1] ^= 0xFF
        dec = decode_packet(bytes(raw))
        assert not dec.crc_ok
        assert dec.header.slot_id_a == 7 and dec.payload == b"hello"

    def test_corrupted_length_field_is_not_fatal(self):
        raw = bytearray(encode_packet(LinkHeader(), b"x"))
        raw[2] = 0xFF
        dec = decode_packet(bytes(raw))
        assert not dec.crc_ok and dec.header is None

    def test_truncated(self):
        with pytest.raises(FormatError):
            decode_packet(encode_packet(LinkHeader(), b"x")[:-1])

    def test_oversize_payload(self):
        with pytest.raises(FormatError):
            encode_packet(LinkHeader(), b"x" * (DATA_SIZE + 1))

    def test_data_section_over_eleven_bits(self):
        with pytest.raises(FormatError):
            encode_packet(LinkHeader(), b"", data_size=2048)

    def test_beacon(self):
        raw = encode_beacon()
        assert not any(raw[:-4])
        assert classify_raw(raw, Role.A) is DownlinkKind.BEACON
        assert classify_downlink(decode_packet(raw).header, Role.B) is DownlinkKind.BEACON


class TestClassify:
    @pytest.mark.parametrize("ids,role,kind", [
        ((5, 9), Role.A, DownlinkKind.XOR),
        ((0, 9), Role.A, DownlinkKind.FROM_OTHER),
        ((5, 0), Role.A, DownlinkKind.SELF_ECHO),
        ((0, 0), Role.A, DownlinkKind.BEACON),
        ((5, 0), Role.B, DownlinkKind.FROM_OTHER),
        ((0, 9), Role.B, DownlinkKind.SELF_ECHO),
    ])
    def test_kinds(self, ids, role, kind):
        assert classify_downlink(LinkHeader(slot_id_a=ids[0], slot_id_b=ids[1]), role) is kind


class TestXorExtract:
    def test_involution(self):
        a, b = os.urandom(100), os.urandom(100)
        assert xor_extract(xor_bytes(a, b), a) == b
        assert xor_bytes(a, a) == bytes(100)

    def test_associative(self):
        rng = random.Random(3)
        for _ in range(50):
            x, y, z = (rng.randbytes(33) for _ in range(3))
            assert xor_bytes(xor_bytes(x, y), z) == xor_bytes(x, xor_bytes(y, z))

    def test_length_mismatch(self):
        with pytest.raises(FormatError):
            xor_extract(b"ab", b"abc")
