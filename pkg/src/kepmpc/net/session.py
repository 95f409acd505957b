"""Role handshake, dealer service and provider submissions.

Topology: P1 connects to P0; both servers connect to the dealer; every data
provider connects to both servers. The first frame on any link is a HELLO
whose JSON body names the role and, between peers, the public parameters.
"""

from __future__ import annotations

import json
import socket
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from ..mpc.triples import TripleCounts, TripleStore, dealer_generate
from .channel import Connection, PeerAborted, ProtocolFault, TransportError, TransportTimeout
from .frames import MsgType

VERSION = "kepmpc/1"


class HandshakeError(TransportError):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


class SubmissionError(TransportError):
    pass


def canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def parse_endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {text!r}")
    return host, int(port)


@dataclass
class RoleConfig:
    role: str                       # p0 | p1 | dealer | provider
    listen: tuple[str, int] | None = None
    connect: list[tuple[str, int]] = field(default_factory=list)
    dealer: tuple[str, int] | None = None
    session_id: int = 1
    timeout: float = 60.0

    def __post_init__(self):
        if self.role not in ("p0", "p1", "dealer", "provider"):
            raise ValueError(f"unknown role {self.role!r}")


def listen_socket(addr: tuple[str, int], backlog: int = 16) -> socket.socket:
    s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    s.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    s.bind(addr)
    s.listen(backlog)
    return s


def connect_retry(addr: tuple[str, int], timeout: float) -> socket.socket:
    """Connect, retrying while the listener comes up."""
    deadline = time.monotonic() + timeout
    while True:
        try:
            s = socket.create_connection(addr, timeout=max(0.1, deadline - time.monotonic()))
            s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            return s
        except OSError as exc:
            if time.monotonic() >= deadline:
                raise TransportTimeout(f"cannot reach {addr[0]}:{addr[1]}: {exc}") from exc
            time.sleep(0.05)


def accept(listener: socket.socket, timeout: float) -> socket.socket:
    listener.settimeout(timeout)
    try:
        s, _ = listener.accept()
    except socket.timeout as exc:
        raise TransportTimeout("no peer connected in time") from exc
    s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return s


def hello(role: str, params: dict | None = None, **extra) -> bytes:
    body = {"version": VERSION, "role": role, "params": params}
    body.update(extra)
    return canonical(body)


def handshake(conn: Connection, role: str, params: dict, peer_role: str, *,
              initiator: bool, received: bytes | None = None) -> dict:
    """Exchange HELLOs; both sides must hold byte-identical params.

    The connecting side speaks first. The listening side may already have
    read the peer's HELLO while dispatching the connection (``received``).
    """
    mine = hello(role, params)
    if initiator:
        conn.send(MsgType.HELLO, mine)
        body = json.loads(_recv_hello(conn))
    else:
        body = json.loads(received if received is not None else _recv_hello(conn))
    reason = None
    if body.get("version") != VERSION:
        reason = "version"
    elif body.get("role") != peer_role:
        reason = "role"
    elif canonical(body.get("params")) != canonical(params):
        reason = "params"
    if reason:
        conn.abort(reason)
        raise HandshakeError(reason, f"peer sent {body.get('params')!r}")
    if not initiator:
        conn.send(MsgType.HELLO, mine)
    return body


def _recv_hello(conn: Connection) -> bytes:
    try:
        return conn.recv(MsgType.HELLO).payload
    except PeerAborted as exc:
        raise HandshakeError(exc.reason) from exc


# --- dealer --------------------------------------------------------------------

class DealerClient:
    """A server's link to the dealer; one request per protocol phase."""

    def __init__(self, conn: Connection, ledger=None):
        self.conn = conn
        self.ledger = ledger

    def introduce(self, role: str, params: dict):
        self.conn.send(MsgType.HELLO, hello(role, params))
        try:
            self.conn.recv(MsgType.HELLO)
        except PeerAborted as exc:
            raise HandshakeError(exc.reason) from exc

    def request(self, phase: str, counts: TripleCounts, party_id: int) -> TripleStore:
        req = canonical({"phase": phase, **counts.to_json()})
        self.conn.send(MsgType.TRIPLES, req)
        reply = self.conn.recv(MsgType.TRIPLES).payload
        if self.ledger is not None:
            self.ledger.add_setup(len(req))
            self.ledger.add_setup(len(reply))
        store = TripleStore.from_bytes(party_id, reply)
        if (store.n_arith, store.n_bit) != (counts.arith, counts.bit):
            raise ProtocolFault("dealer sent a different number of triples")
        return store

    def done(self):
        try:
            self.conn.send(MsgType.RESULT, b"done")
        except TransportError:
            pass


class NoDealer:
    """Stand-in when no dealer is configured: every phase gets an empty store."""

    def request(self, phase: str, counts: TripleCounts, party_id: int) -> TripleStore:
        return TripleStore.empty(party_id)

    def done(self):
        pass


def dealer_accept(listener: socket.socket, session_id: int = 1, timeout: float = 60.0):
    """Accept both servers in either order; returns (c0, c1, hellos)."""
    got = {}
    while len(got) < 2:
        conn = Connection(accept(listener, timeout), session_id, timeout=timeout)
        body = json.loads(conn.recv(MsgType.HELLO).payload)
        role = body.get("role")
        if role not in ("p0", "p1") or role in got:
            conn.abort("role")
            conn.close()
            continue
        got[role] = (conn, body)
    return got["p0"][0], got["p1"][0], [got["p0"][1], got["p1"][1]]


def serve_dealer(c0: Connection, c1: Connection, seed=None, hellos: list | None = None) -> int:
    """Answer matching per-phase requests from both servers. Returns the
    number of phases served."""
    pre = hellos
    hellos = []
    for k, (c, role) in enumerate(((c0, "p0"), (c1, "p1"))):
        body = pre[k] if pre else json.loads(c.recv(MsgType.HELLO).payload)
        if body.get("version") != VERSION or body.get("role") != role:
            for x in (c0, c1):
                x.abort("role")
            raise HandshakeError("role", f"expected {role}, got {body.get('role')}")
        hellos.append(body)
    if canonical(hellos[0]["params"]) != canonical(hellos[1]["params"]):
        for x in (c0, c1):
            x.abort("params")
        raise HandshakeError("params", "servers disagree")
    for c in (c0, c1):
        c.send(MsgType.HELLO, hello("dealer"))

    root = np.random.SeedSequence(seed)
    served = 0
    while True:
        f0, f1 = c0.recv(), c1.recv()
        if f0.msg_type is MsgType.RESULT and f1.msg_type is MsgType.RESULT:
            return served
        if not (f0.msg_type is f1.msg_type is MsgType.TRIPLES) or f0.payload != f1.payload:
            for x in (c0, c1):
                x.abort("setup mismatch")
            raise ProtocolFault("servers sent different setup requests")
        req = json.loads(f0.payload)
        counts = TripleCounts(int(req["arith"]), int(req["bit"]))
        h0, h1 = dealer_generate(counts, root.spawn(1)[0])
        c0.send(MsgType.TRIPLES, h0.to_bytes())
        c1.send(MsgType.TRIPLES, h1.to_bytes())
        served += 1


# --- data providers ------------------------------------------------------------

def provider_submit(tables: tuple[np.ndarray, np.ndarray], endpoints, provider_id: int,
                    hla_count: int, session_id: int = 1, timeout: float = 30.0) -> dict:
    """Send share i of the input table to server i, committing only once both
    servers have staged their share."""
    from ..protocols.inputs import table_to_bytes

    conns: list[Connection] = []
    try:
        for addr in endpoints:
            conns.append(Connection(connect_retry(addr, timeout), session_id, timeout=timeout))
        for k, c in enumerate(conns):
            c.send(MsgType.HELLO, hello("provider", {"hla_count": hla_count},
                                        provider_id=provider_id))
            body = json.loads(c.recv(MsgType.HELLO).payload)
            if body.get("role") != f"p{k}":
                raise SubmissionError(f"endpoint {k} is {body.get('role')}, expected p{k}")
        for c, t in zip(conns, tables):
            c.send(MsgType.INPUT_SHARE, table_to_bytes(t))
        for c in conns:
            if c.recv(MsgType.RESULT).payload != b"staged":
                raise SubmissionError("server did not stage the share")
        for c in conns:
            c.send(MsgType.RESULT, b"commit")
        for c in conns:
            c.recv(MsgType.RESULT)
        return {"provider_id": provider_id, "pairs": int(tables[0].shape[0])}
    except (TransportError, OSError) as exc:
        for c in conns:
            c.abort("provider withdrew")
        if isinstance(exc, SubmissionError):
            raise
        raise SubmissionError(f"submission aborted: {exc}") from exc
    finally:
        for c in conns:
            c.close()


class InputCollector:
    """Server side of provider submissions.

    Each provider is handled on its own thread. A share is staged on
    INPUT_SHARE and becomes usable only after the provider's commit, so a
    provider that withdraws or disappears leaves nothing behind.
    """

    def __init__(self, party_id: int, hla_count: int, session_id: int = 1, timeout: float = 30.0):
        self.party_id = party_id
        self.hla_count = hla_count
        self.session_id = session_id
        self.timeout = timeout
        self.committed: dict[int, np.ndarray] = {}
        self.discarded: list[tuple[int | None, str]] = []
        self._cv = threading.Condition()

    def handle(self, conn: Connection, first_hello: dict | None = None):
        from ..protocols.inputs import table_from_bytes

        pid = None
        try:
            body = first_hello or json.loads(conn.recv(MsgType.HELLO).payload)
            pid = int(body["provider_id"])
            if body.get("role") != "provider" or body.get("params", {}).get("hla_count") != self.hla_count:
                conn.abort("params")
                raise HandshakeError("params")
            conn.send(MsgType.HELLO, hello(f"p{self.party_id}"))
            staged = table_from_bytes(conn.recv(MsgType.INPUT_SHARE).payload)
            conn.send(MsgType.RESULT, b"staged")
            if conn.recv(MsgType.RESULT).payload != b"commit":
                raise ProtocolFault("expected commit")
            with self._cv:
                if pid in self.committed:
                    raise ProtocolFault(f"duplicate provider id {pid}")
            # ack before publishing, so a server that stops right after
            # collecting never leaves a committed provider without its ack
            conn.send(MsgType.RESULT, b"ok")
            with self._cv:
                self.committed[pid] = staged
                self._cv.notify_all()
        except (TransportError, ValueError, KeyError) as exc:
            with self._cv:
                self.discarded.append((pid, str(exc)))
                self._cv.notify_all()
        finally:
            conn.close()

    def spawn(self, conn: Connection, first_hello: dict | None = None) -> threading.Thread:
        t = threading.Thread(target=self.handle, args=(conn, first_hello), daemon=True)
        t.start()
        return t

    def wait(self, expected: int, timeout: float | None = None) -> np.ndarray:
        """Block until ``expected`` providers committed; rows ordered by
        (provider id, submission index)."""
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._cv:
            while len(self.committed) < expected:
                left = None if deadline is None else deadline - time.monotonic()
                if left is not None and left <= 0:
                    raise TransportTimeout(
                        f"only {len(self.committed)} of {expected} providers committed")
                self._cv.wait(left)
            parts = [self.committed[k] for k in sorted(self.committed)]
        if not parts:
            return np.zeros((0, 12), dtype=np.uint64)
        return np.concatenate(parts, axis=0)

    def manifest(self) -> list[list[int]]:
        with self._cv:
            return [[k, int(v.shape[0])] for k, v in sorted(self.committed.items())]


class Acceptor:
    """Accepts connections on a server's listening socket and routes them by
    the role in their first HELLO: providers go to the collector, the other
    server is handed to :meth:`wait_peer`."""

    def __init__(self, listener: socket.socket, collector: InputCollector,
                 session_id: int = 1, timeout: float = 60.0):
        self.listener = listener
        self.collector = collector
        self.session_id = session_id
        self.timeout = timeout
        self._peer: list[tuple[Connection, bytes]] = []
        self._cv = threading.Condition()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    def _loop(self):
        self.listener.settimeout(0.2)
        while not self._stop.is_set():
            try:
                sock, _ = self.listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            threading.Thread(target=self._dispatch, args=(sock,), daemon=True).start()

    def _dispatch(self, sock: socket.socket):
        conn = Connection(sock, self.session_id, first=True, timeout=self.timeout)
        try:
            raw = conn.recv(MsgType.HELLO).payload
            body = json.loads(raw)
        except (TransportError, ValueError):
            conn.close()
            return
        if body.get("role") == "provider":
            self.collector.handle(conn, body)
        elif body.get("role") == "p1":
            with self._cv:
                self._peer.append((conn, raw))
                self._cv.notify_all()
        else:
            conn.abort("role")
            conn.close()

    def wait_peer(self, timeout: float) -> tuple[Connection, bytes]:
        deadline = time.monotonic() + timeout
        with self._cv:
            while not self._peer:
                left = deadline - time.monotonic()
                if left <= 0:
                    raise TransportTimeout("the other server did not connect")
                self._cv.wait(left)
            return self._peer.pop(0)

    def close(self):
        self._stop.set()
        try:
            self.listener.close()
        except OSError:
            pass
