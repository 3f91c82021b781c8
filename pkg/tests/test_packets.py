from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bootauth.packets import (
    TAG_ALARM,
    TAG_CHALLENGE,
    TAG_CHALLENGE_RESPONSE,
    TAG_RESPONSE,
    Alarm,
    Challenge,
    ChallengeResponse,
    PacketError,
    Response,
    decode_packet,
    encode_packet,
    packet_digest,
)

_bytes = st.binary(min_size=0, max_size=200)


@given(_bytes)
def test_challenge_round_trip(ct):
    assert decode_packet(encode_packet(Challenge(ct))) == Challenge(ct)


@given(_bytes, _bytes)
def test_challenge_response_round_trip(ct, ephe):
    pkt = ChallengeResponse(ct, ephe)
    assert decode_packet(encode_packet(pkt)) == pkt


@given(_bytes, _bytes)
def test_response_round_trip(ct, ephe):
    pkt = Response(ct, ephe)
    assert decode_packet(encode_packet(pkt)) == pkt


@given(st.integers(min_value=0, max_value=255))
def test_alarm_round_trip(code):
    assert decode_packet(encode_packet(Alarm(code))) == Alarm(code)


def test_wire_tags_are_frozen():
    assert encode_packet(Challenge(b"c"))[0] == TAG_CHALLENGE == 0x01
    assert encode_packet(ChallengeResponse(b"c", b"e"))[0] == TAG_CHALLENGE_RESPONSE == 0x02
    assert encode_packet(Response(b"c", b"e"))[0] == TAG_RESPONSE == 0x03
    assert encode_packet(Alarm(5))[0] == TAG_ALARM == 0x0F


def test_wire_layout_is_length_prefixed():
    assert encode_packet(Challenge(b"abc")) == b"\x01\x00\x00\x00\x03abc"
    assert encode_packet(ChallengeResponse(b"ab", b"c")) == b"\x02\x00\x00\x00\x02ab\x00\x00\x00\x01c"
    assert encode_packet(Alarm(0)) == b"\x0f\x00\x00\x00\x01\x00"


@pytest.mark.parametrize(
    "blob",
    [
        b"",
        b"\x01\x00\x00\x00",  # truncated length prefix
        b"\x01\x00\x00\x00\x05ab",  # truncated field
        b"\x07\x00\x00\x00\x01x",  # unknown tag
        b"\x01\x00\x00\x00\x01a\x00\x00\x00\x01b",  # wrong field count
        b"\x0f\x00\x00\x00\x02ab",  # alarm code must be one byte
    ],
)
def test_decode_rejects_malformed(blob):
    with pytest.raises(PacketError):
        decode_packet(blob)


def test_alarm_code_range():
    with pytest.raises(PacketError):
        Alarm(256)
    with pytest.raises(PacketError):
        Alarm(-1)


def test_packet_digest_tracks_content():
    assert packet_digest(Challenge(b"a")) == packet_digest(Challenge(b"a"))
    assert packet_digest(Challenge(b"a")) != packet_digest(Challenge(b"b"))
    assert len(packet_digest(Alarm(0))) == 64
