"""Beaver triples from a trusted dealer.

Each party receives PRG keys for its ``a`` and ``b`` shares plus an explicit
``c`` share, so a half costs 64 bytes of keys plus one word per triple on the
wire. Arithmetic triples satisfy c = a*b mod 2^32; bit triples are 64 parallel
AND triples packed in a word.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

_HEADER = struct.Struct(">QQ16s16s16s16s")


class SetupUnderprovisioned(RuntimeError):
    """Raised when the online phase needs more triples than the dealer gave."""


def _stream(key: bytes, n: int, skip: int = 0) -> np.ndarray:
    gen = np.random.Philox(key=int.from_bytes(key, "big"))
    if skip:
        gen.advance(skip)
    return gen.random_raw(n).astype(np.uint64)


class _Stream:
    """Sequential reader of a Philox keystream."""

    def __init__(self, key: bytes):
        self.key = key
        self._gen = np.random.Philox(key=int.from_bytes(key, "big"))

    def take(self, n: int) -> np.ndarray:
        return self._gen.random_raw(n).astype(np.uint64)


@dataclass
class TripleCounts:
    arith: int = 0
    bit: int = 0

    def to_json(self):
        return {"arith": self.arith, "bit": self.bit}


class TripleStore:
    def __init__(self, party_id: int, keys: tuple[bytes, bytes, bytes, bytes],
                 c_arith: np.ndarray, c_bit: np.ndarray):
        self.party_id = party_id
        self.keys = keys
        self.c_arith = np.asarray(c_arith, dtype=np.uint32)
        self.c_bit = np.asarray(c_bit, dtype=np.uint64)
        self._a_arith, self._b_arith = _Stream(keys[0]), _Stream(keys[1])
        self._a_bit, self._b_bit = _Stream(keys[2]), _Stream(keys[3])
        self.used_arith = 0
        self.used_bit = 0

    @classmethod
    def empty(cls, party_id: int) -> "TripleStore":
        zero = bytes(16)
        return cls(party_id, (zero,) * 4, np.zeros(0, np.uint32), np.zeros(0, np.uint64))

    @property
    def n_arith(self) -> int:
        return len(self.c_arith)

    @property
    def n_bit(self) -> int:
        return len(self.c_bit)

    def remaining(self) -> TripleCounts:
        return TripleCounts(self.n_arith - self.used_arith, self.n_bit - self.used_bit)

    def take_arith(self, n: int):
        if self.used_arith + n > self.n_arith:
            raise SetupUnderprovisioned(
                f"setup-underprovisioned: need {n} arithmetic triples, "
                f"{self.n_arith - self.used_arith} left")
        a = self._a_arith.take(n).astype(np.uint32)
        b = self._b_arith.take(n).astype(np.uint32)
        c = self.c_arith[self.used_arith:self.used_arith + n]
        self.used_arith += n
        return a, b, c

    def take_bit(self, n: int):
        if self.used_bit + n > self.n_bit:
            raise SetupUnderprovisioned(
                f"setup-underprovisioned: need {n} bit triples, "
                f"{self.n_bit - self.used_bit} left")
        a = self._a_bit.take(n)
        b = self._b_bit.take(n)
        c = self.c_bit[self.used_bit:self.used_bit + n]
        self.used_bit += n
        return a, b, c

    def materialize(self):
        """All stored triples as arrays, without touching the cursors."""
        k = self.keys
        arith = (_stream(k[0], self.n_arith).astype(np.uint32),
                 _stream(k[1], self.n_arith).astype(np.uint32), self.c_arith)
        bit = (_stream(k[2], self.n_bit), _stream(k[3], self.n_bit), self.c_bit)
        return arith, bit

    def to_bytes(self) -> bytes:
        head = _HEADER.pack(self.n_arith, self.n_bit, *self.keys)
        return head + self.c_arith.astype(">u4").tobytes() + self.c_bit.astype(">u8").tobytes()

    @classmethod
    def from_bytes(cls, party_id: int, data: bytes) -> "TripleStore":
        n_arith, n_bit, *keys = _HEADER.unpack_from(data)
        off = _HEADER.size
        c_arith = np.frombuffer(data, dtype=">u4", count=n_arith, offset=off).astype(np.uint32)
        off += 4 * n_arith
        c_bit = np.frombuffer(data, dtype=">u8", count=n_bit, offset=off).astype(np.uint64)
        return cls(party_id, tuple(keys), c_arith, c_bit)


def dealer_generate(counts: TripleCounts, seed) -> tuple[TripleStore, TripleStore]:
    """Produce both halves of a triple store. Deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    keys = [tuple(rng.bytes(16) for _ in range(4)) for _ in range(2)]
    na, nb = counts.arith, counts.bit

    a = [_stream(keys[p][0], na).astype(np.uint32) for p in (0, 1)]
    b = [_stream(keys[p][1], na).astype(np.uint32) for p in (0, 1)]
    c = (a[0] + a[1]) * (b[0] + b[1])
    c0 = rng.integers(0, 1 << 32, size=na, dtype=np.uint64).astype(np.uint32)
    c_arith = (c0, (c - c0).astype(np.uint32))

    a = [_stream(keys[p][2], nb) for p in (0, 1)]
    b = [_stream(keys[p][3], nb) for p in (0, 1)]
    c = (a[0] ^ a[1]) & (b[0] ^ b[1])
    c0 = rng.integers(0, np.iinfo(np.uint64).max, size=nb, dtype=np.uint64, endpoint=True)
    c_bit = (c0, c ^ c0)

    return (TripleStore(0, keys[0], c_arith[0], c_bit[0]),
            TripleStore(1, keys[1], c_arith[1], c_bit[1]))
