"""Wire format.

Every message is one frame::

    magic       4 bytes   b"SPK1"
    msg_type    1 byte    MsgType
    session_id  8 bytes   big-endian
    round_no    4 bytes   big-endian
    payload_len 4 bytes   big-endian
    payload     payload_len bytes

The header is validated before any payload byte is interpreted.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

MAGIC = b"SPK1"
HEADER = struct.Struct(">4sBQII")
MAX_PAYLOAD = (1 << 32) - 1


class MsgType(IntEnum):
    HELLO = 1
    INPUT_SHARE = 2
    TRIPLES = 3
    ROUND = 4
    REVEAL = 5
    RESULT = 6
    ABORT = 7


class FrameError(ValueError):
    """Malformed frame header."""


@dataclass(frozen=True)
class Frame:
    msg_type: MsgType
    session_id: int
    round_no: int
    payload: bytes = b""

    def encode(self) -> bytes:
        if len(self.payload) > MAX_PAYLOAD:
            raise FrameError("payload too large")
        return HEADER.pack(MAGIC, int(self.msg_type), self.session_id,
                           self.round_no, len(self.payload)) + self.payload


def decode_header(data: bytes) -> tuple[MsgType, int, int, int]:
    if len(data) != HEADER.size:
        raise FrameError(f"short header: {len(data)} bytes")
    magic, mtype, session_id, round_no, length = HEADER.unpack(data)
    if magic != MAGIC:
        raise FrameError(f"bad magic {magic!r}")
    try:
        mtype = MsgType(mtype)
    except ValueError:
        raise FrameError(f"unknown message type {mtype}") from None
    return mtype, session_id, round_no, length


def decode(data: bytes) -> Frame:
    """Decode one complete frame held in ``data``."""
    mtype, sid, rno, length = decode_header(data[:HEADER.size])
    payload = data[HEADER.size:]
    if len(payload) != length:
        raise FrameError(f"payload length {len(payload)} does not match header {length}")
    return Frame(mtype, sid, rno, bytes(payload))
