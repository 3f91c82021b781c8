"""Channel packets and their bit-exact wire encoding.

Wire layout: one tag byte, then each field as a 4-byte big-endian length
prefix followed by the field bytes, in declaration order. Mutation and fuzz
tooling operates on this encoding.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Union

TAG_CHALLENGE = 0x01
TAG_CHALLENGE_RESPONSE = 0x02
TAG_RESPONSE = 0x03
TAG_ALARM = 0x0F

ALARM_OK = 0x00  # completion signal; nonzero codes are phase-specific errors


class PacketError(Exception):
    """Malformed packet bytes or misuse of the codec."""


@dataclass(frozen=True)
class Challenge:
    """Challenge nonce sealed for the peer processor."""

    ciphertext: bytes


@dataclass(frozen=True)
class ChallengeResponse:
    """Nonce echo + fresh nonce + ephemeral-key digest, sealed; ephemeral key rides in clear."""

    ciphertext: bytes
    ephe_public: bytes


@dataclass(frozen=True)
class Response:
    """Nonce echo + ephemeral-key digest, sealed; ephemeral key rides in clear."""

    ciphertext: bytes
    ephe_public: bytes


@dataclass(frozen=True)
class Alarm:
    """Unencrypted one-byte status code terminating the exchange."""

    code: int

    def __post_init__(self) -> None:
        if not 0 <= self.code <= 0xFF:
            raise PacketError("alarm code must fit one byte")


Packet = Union[Challenge, ChallengeResponse, Response, Alarm]


def _lp(field: bytes) -> bytes:
    return len(field).to_bytes(4, "big") + field


def _fields(pkt: Packet) -> tuple[int, tuple[bytes, ...]]:
    if isinstance(pkt, Challenge):
        return TAG_CHALLENGE, (pkt.ciphertext,)
    if isinstance(pkt, ChallengeResponse):
        return TAG_CHALLENGE_RESPONSE, (pkt.ciphertext, pkt.ephe_public)
    if isinstance(pkt, Response):
        return TAG_RESPONSE, (pkt.ciphertext, pkt.ephe_public)
    if isinstance(pkt, Alarm):
        return TAG_ALARM, (bytes([pkt.code]),)
    raise PacketError(f"not a packet: {pkt!r}")


def encode_packet(pkt: Packet) -> bytes:
    tag, fields = _fields(pkt)
    return bytes([tag]) + b"".join(_lp(f) for f in fields)


def decode_packet(blob: bytes) -> Packet:
    if not blob:
        raise PacketError("empty packet")
    tag, rest = blob[0], blob[1:]
    fields = []
    offset = 0
    while offset < len(rest):
        if offset + 4 > len(rest):
            raise PacketError("truncated length prefix")
        n = int.from_bytes(rest[offset : offset + 4], "big")
        offset += 4
        if offset + n > len(rest):
            raise PacketError("truncated field")
        fields.append(rest[offset : offset + n])
        offset += n
    if tag == TAG_CHALLENGE and len(fields) == 1:
        return Challenge(fields[0])
    if tag == TAG_CHALLENGE_RESPONSE and len(fields) == 2:
        return ChallengeResponse(fields[0], fields[1])
    if tag == TAG_RESPONSE and len(fields) == 2:
        return Response(fields[0], fields[1])
    if tag == TAG_ALARM and len(fields) == 1 and len(fields[0]) == 1:
        return Alarm(fields[0][0])
    raise PacketError(f"unknown tag 0x{tag:02x} or wrong field count")


def packet_digest(pkt: Packet) -> str:
    """Hex SHA-256 of the wire encoding; trace/diagnostic identity of a packet."""
    return hashlib.sha256(encode_packet(pkt)).hexdigest()


def packet_to_json(pkt: Packet) -> dict:
    if isinstance(pkt, Challenge):
        return {"kind": "challenge", "ciphertext": pkt.ciphertext.hex()}
    if isinstance(pkt, ChallengeResponse):
        return {"kind": "challenge_response", "ciphertext": pkt.ciphertext.hex(), "ephe_public": pkt.ephe_public.hex()}
    if isinstance(pkt, Response):
        return {"kind": "response", "ciphertext": pkt.ciphertext.hex(), "ephe_public": pkt.ephe_public.hex()}
    if isinstance(pkt, Alarm):
        return {"kind": "alarm", "code": pkt.code}
    raise PacketError(f"not a packet: {pkt!r}")
