"""Framed, ordered byte transport over a connected stream socket."""

from __future__ import annotations

import hashlib
import json
import socket
from dataclasses import dataclass, field

from .frames import HEADER, Frame, FrameError, MsgType, decode_header


class TransportError(RuntimeError):
    pass


class ProtocolFault(TransportError):
    """The peer broke sequencing or sent an unexpected frame."""


class PeerAborted(TransportError):
    def __init__(self, reason: str):
        super().__init__(f"peer aborted: {reason}")
        self.reason = reason


class TransportTimeout(TransportError):
    pass


class PeerDisconnected(TransportError):
    pass


@dataclass
class TranscriptEntry:
    direction: str
    msg_type: str
    round_no: int
    length: int
    digest: str | None = None

    def to_json(self):
        d = {"dir": self.direction, "type": self.msg_type, "round": self.round_no, "len": self.length}
        if self.digest is not None:
            d["sha256"] = self.digest
        return d


@dataclass
class Transcript:
    digests: bool = False
    entries: list[TranscriptEntry] = field(default_factory=list)

    def record(self, direction: str, frame: Frame):
        digest = hashlib.sha256(frame.payload).hexdigest() if self.digests else None
        self.entries.append(TranscriptEntry(direction, frame.msg_type.name, frame.round_no,
                                            len(frame.payload), digest))

    def reveal_events(self) -> int:
        return sum(1 for e in self.entries if e.direction == "send" and e.msg_type == "REVEAL")

    def online_lengths(self) -> list[tuple[str, int]]:
        return [(e.msg_type, e.length) for e in self.entries
                if e.direction == "send" and e.msg_type in ("ROUND", "REVEAL")]

    def dump(self, path):
        with open(path, "w") as fh:
            for e in self.entries:
                fh.write(json.dumps(e.to_json()) + "\n")


class Connection:
    """One peer link. ``first`` decides who writes first in a symmetric round,
    so two parties exchanging large payloads never both block on send."""

    def __init__(self, sock: socket.socket, session_id: int = 0, *, first: bool = True,
                 ledger=None, transcript: Transcript | None = None, timeout: float | None = 60.0):
        self.sock = sock
        self.sock.settimeout(timeout)
        self.session_id = session_id
        self.first = first
        self.ledger = ledger
        self.transcript = transcript
        self.sent_round = 0
        self.recv_round = 0
        self.closed = False

    # --- raw frames ---------------------------------------------------------

    def send(self, msg_type: MsgType, payload: bytes = b"", round_no: int = 0):
        frame = Frame(msg_type, self.session_id, round_no, payload)
        try:
            self.sock.sendall(frame.encode())
        except socket.timeout as exc:
            raise TransportTimeout("send timed out") from exc
        except OSError as exc:
            raise PeerDisconnected(f"send failed: {exc}") from exc
        if self.transcript is not None:
            self.transcript.record("send", frame)

    def _recv_exact(self, n: int) -> bytes:
        buf = bytearray(n)
        view = memoryview(buf)
        got = 0
        while got < n:
            try:
                k = self.sock.recv_into(view[got:], n - got)
            except socket.timeout as exc:
                raise TransportTimeout("receive timed out") from exc
            except OSError as exc:
                raise PeerDisconnected(f"receive failed: {exc}") from exc
            if k == 0:
                raise PeerDisconnected("peer closed the connection")
            got += k
        return bytes(buf)

    def recv(self, expect: MsgType | None = None) -> Frame:
        head = self._recv_exact(HEADER.size)
        try:
            mtype, sid, rno, length = decode_header(head)
        except FrameError as exc:
            raise ProtocolFault(f"corrupt frame header: {exc}") from exc
        if self.session_id and sid != self.session_id:
            raise ProtocolFault(f"session mismatch: got {sid:#x}")
        payload = self._recv_exact(length) if length else b""
        frame = Frame(mtype, sid, rno, payload)
        if self.transcript is not None:
            self.transcript.record("recv", frame)
        if mtype is MsgType.ABORT:
            raise PeerAborted(payload.decode("utf-8", "replace"))
        if expect is not None and mtype is not expect:
            raise ProtocolFault(f"expected {expect.name}, got {mtype.name}")
        return frame

    def abort(self, reason: str):
        try:
            self.send(MsgType.ABORT, reason.encode("utf-8"))
        except TransportError:
            pass

    def close(self):
        if not self.closed:
            self.closed = True
            try:
                self.sock.close()
            except OSError:
                pass

    # --- sequenced online rounds ---------------------------------------------

    def _check_round(self, frame: Frame):
        if frame.round_no != self.recv_round + 1:
            raise ProtocolFault(f"round gap: expected {self.recv_round + 1}, got {frame.round_no}")
        self.recv_round = frame.round_no

    def _exchange(self, kind: MsgType, payload: bytes) -> bytes:
        self.sent_round += 1
        if self.first:
            self.send(kind, payload, self.sent_round)
            frame = self.recv(kind)
        else:
            frame = self.recv(kind)
            self.send(kind, payload, self.sent_round)
        self._check_round(frame)
        if len(frame.payload) != len(payload):
            raise ProtocolFault(f"asymmetric round: sent {len(payload)}, got {len(frame.payload)}")
        return frame.payload

    def exchange_round(self, payload: bytes) -> bytes:
        out = self._exchange(MsgType.ROUND, payload)
        if self.ledger is not None:
            self.ledger.add_round(len(payload))
        return out

    def exchange_reveal(self, payload: bytes) -> bytes:
        out = self._exchange(MsgType.REVEAL, payload)
        if self.ledger is not None:
            self.ledger.add_reveal(len(payload))
        return out


def connected_pair(session_id: int = 0, **kw) -> tuple[Connection, Connection]:
    """Two ends of an in-process socket pair, first end writes first."""
    a, b = socket.socketpair()
    return (Connection(a, session_id, first=True, **kw),
            Connection(b, session_id, first=False, **kw))
