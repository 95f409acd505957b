"""Share vectors held by one computing party.

Arithmetic shares live in Z_{2^32} (numpy ``uint32`` wraps for free); Boolean
shares are XOR shares packed into ``uint64`` words, ``width`` low bits per
lane. Every operation in this module is local: no communication, no triples.
"""

from __future__ import annotations

import numpy as np

RING_BITS = 32
RING_DTYPE = np.uint32
BOOL_DTYPE = np.uint64
MAX_WIDTH = 64


class ShapeError(ValueError):
    pass


def width_mask(width: int) -> np.uint64:
    if not 1 <= width <= MAX_WIDTH:
        raise ValueError(f"lane width must be in 1..64, got {width}")
    return np.uint64((1 << width) - 1)


def _check_same(x, y):
    if x.party_id != y.party_id:
        raise ShapeError("shares belong to different parties")


class ArithShareVec:
    __slots__ = ("party_id", "values", "tag")

    def __init__(self, party_id: int, values, tag: str = ""):
        self.party_id = party_id
        self.values = np.asarray(values, dtype=RING_DTYPE)
        self.tag = tag

    @property
    def shape(self):
        return self.values.shape

    def __len__(self):
        return len(self.values)

    def _like(self, values):
        return ArithShareVec(self.party_id, values, self.tag)

    def __add__(self, other: "ArithShareVec") -> "ArithShareVec":
        _check_same(self, other)
        if self.shape != other.shape:
            raise ShapeError(f"shape mismatch {self.shape} vs {other.shape}")
        return self._like(self.values + other.values)

    def __sub__(self, other: "ArithShareVec") -> "ArithShareVec":
        _check_same(self, other)
        if self.shape != other.shape:
            raise ShapeError(f"shape mismatch {self.shape} vs {other.shape}")
        return self._like(self.values - other.values)

    def __neg__(self):
        return self._like(-self.values)

    def add_public(self, c) -> "ArithShareVec":
        """Add a public constant; only party 0 touches its share."""
        if self.party_id != 0:
            return self._like(self.values.copy())
        return self._like(self.values + np.asarray(c, dtype=np.uint64).astype(RING_DTYPE))

    def scale(self, c) -> "ArithShareVec":
        """Multiply by a public constant."""
        return self._like(self.values * np.asarray(c, dtype=np.uint64).astype(RING_DTYPE))

    def __getitem__(self, idx) -> "ArithShareVec":
        return self._like(self.values[idx])

    def reshape(self, *shape) -> "ArithShareVec":
        return self._like(self.values.reshape(*shape))

    def sum(self, axis=None) -> "ArithShareVec":
        return self._like(self.values.sum(axis=axis, dtype=RING_DTYPE))

    @classmethod
    def public(cls, party_id: int, value, shape=None) -> "ArithShareVec":
        """Trivial sharing of a public value: party 0 holds it, party 1 holds 0."""
        arr = np.asarray(value, dtype=np.uint64).astype(RING_DTYPE)
        if shape is not None:
            arr = np.broadcast_to(arr, shape).copy()
        return cls(party_id, arr if party_id == 0 else np.zeros_like(arr))

    def __repr__(self):
        return f"ArithShareVec(party={self.party_id}, shape={self.shape})"


class BoolShareVec:
    __slots__ = ("party_id", "bits", "width")

    def __init__(self, party_id: int, bits, width: int):
        self.party_id = party_id
        self.width = width
        self.bits = np.asarray(bits, dtype=BOOL_DTYPE) & width_mask(width)

    @property
    def shape(self):
        return self.bits.shape

    @property
    def mask(self):
        return width_mask(self.width)

    def __len__(self):
        return len(self.bits)

    def _like(self, bits, width=None):
        return BoolShareVec(self.party_id, bits, self.width if width is None else width)

    def __xor__(self, other: "BoolShareVec") -> "BoolShareVec":
        _check_same(self, other)
        if self.shape != other.shape:
            raise ShapeError(f"shape mismatch {self.shape} vs {other.shape}")
        return self._like(self.bits ^ other.bits, max(self.width, other.width))

    def __invert__(self) -> "BoolShareVec":
        if self.party_id == 0:
            return self._like(self.bits ^ self.mask)
        return self._like(self.bits.copy())

    def xor_public(self, c) -> "BoolShareVec":
        if self.party_id != 0:
            return self._like(self.bits.copy())
        return self._like(self.bits ^ np.asarray(c, dtype=BOOL_DTYPE))

    def and_public(self, c) -> "BoolShareVec":
        return self._like(self.bits & np.asarray(c, dtype=BOOL_DTYPE))

    def set_bits(self, c) -> "BoolShareVec":
        """OR with a public mask: the masked bits become 1."""
        c = np.asarray(c, dtype=BOOL_DTYPE)
        if self.party_id == 0:
            return self._like(self.bits | c)
        return self._like(self.bits & ~c)

    def __lshift__(self, s: int) -> "BoolShareVec":
        return self._like(self.bits << np.uint64(s))

    def __rshift__(self, s: int) -> "BoolShareVec":
        return self._like(self.bits >> np.uint64(s))

    def bit(self, i: int) -> "BoolShareVec":
        return self._like((self.bits >> np.uint64(i)) & np.uint64(1), 1)

    def with_width(self, width: int) -> "BoolShareVec":
        """Truncate (or zero-extend) every lane to ``width`` bits."""
        return self._like(self.bits, width)

    def expand(self) -> "BoolShareVec":
        """Turn 1-bit lanes into all-ones / all-zeros 64-bit masks (local)."""
        b = self.bits & np.uint64(1)
        return self._like((np.uint64(0) - b), MAX_WIDTH)

    def __getitem__(self, idx) -> "BoolShareVec":
        return self._like(self.bits[idx])

    def reshape(self, *shape) -> "BoolShareVec":
        return self._like(self.bits.reshape(*shape))

    @classmethod
    def public(cls, party_id: int, value, width: int, shape=None) -> "BoolShareVec":
        arr = np.asarray(value, dtype=BOOL_DTYPE)
        if shape is not None:
            arr = np.broadcast_to(arr, shape).copy()
        return cls(party_id, arr if party_id == 0 else np.zeros_like(arr), width)

    def __repr__(self):
        return f"BoolShareVec(party={self.party_id}, shape={self.shape}, width={self.width})"


def concat(parts, axis=0):
    """Concatenate share vectors of one party along ``axis``."""
    first = parts[0]
    if isinstance(first, ArithShareVec):
        return ArithShareVec(first.party_id, np.concatenate([p.values for p in parts], axis=axis))
    width = max(p.width for p in parts)
    return BoolShareVec(first.party_id, np.concatenate([p.bits for p in parts], axis=axis), width)


def stack(parts, axis=0):
    first = parts[0]
    if isinstance(first, ArithShareVec):
        return ArithShareVec(first.party_id, np.stack([p.values for p in parts], axis=axis))
    width = max(p.width for p in parts)
    return BoolShareVec(first.party_id, np.stack([p.bits for p in parts], axis=axis), width)


def pack_lanes(x: BoolShareVec) -> BoolShareVec:
    """Pack 1-bit lanes along the last axis into one word (lane i -> bit i).

    XOR sharing is bitwise, so this is a local operation.
    """
    n = x.shape[-1]
    if n > MAX_WIDTH:
        raise ShapeError("cannot pack more than 64 lanes into one word")
    shifts = np.arange(n, dtype=BOOL_DTYPE)
    words = np.bitwise_or.reduce((x.bits & np.uint64(1)) << shifts, axis=-1)
    return BoolShareVec(x.party_id, words, n)


# --- dealer/provider side helpers (hold both shares) -----------------------

def share(plaintext, domain: str, rng: np.random.Generator, width: int = RING_BITS):
    """Split ``plaintext`` into two shares. Returns (share for P0, share for P1)."""
    if domain == "A":
        x = np.asarray(plaintext, dtype=np.uint64).astype(RING_DTYPE)
        r = rng.integers(0, 1 << RING_BITS, size=x.shape, dtype=np.uint64).astype(RING_DTYPE)
        return ArithShareVec(0, r), ArithShareVec(1, x - r)
    if domain == "B":
        x = np.asarray(plaintext, dtype=BOOL_DTYPE) & width_mask(width)
        r = rng.integers(0, np.iinfo(np.uint64).max, size=x.shape, dtype=np.uint64, endpoint=True)
        r &= width_mask(width)
        return BoolShareVec(0, r, width), BoolShareVec(1, x ^ r, width)
    raise ValueError(f"unknown sharing domain {domain!r}")


def reconstruct(s0, s1) -> np.ndarray:
    if isinstance(s0, ArithShareVec):
        return (s0.values + s1.values).astype(RING_DTYPE)
    return (s0.bits ^ s1.bits) & width_mask(max(s0.width, s1.width))
