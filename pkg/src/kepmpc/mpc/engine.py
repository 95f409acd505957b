"""Two-party gate evaluation over additive and XOR shares.

An :class:`Engine` belongs to one party. Interactive gates (AND, MUL and
everything built on them) consume dealer triples and exchange exactly one
message per batched call through ``channel.exchange_round``. Local gates live
on the share classes in :mod:`kepmpc.mpc.shares`.

Control flow in this module never depends on share values, so running the
same code against a :class:`CountingChannel` and :class:`CountingTriples`
yields the exact triple demand of a computation without talking to anyone.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .shares import (
    BOOL_DTYPE, RING_BITS, RING_DTYPE, ArithShareVec, BoolShareVec, ShapeError,
)
from .triples import TripleCounts, TripleStore


def next_pow2(w: int) -> int:
    return 1 << max(0, (w - 1).bit_length())


def _field_mask(width: int, field: int, lo: int, hi: int | None = None) -> np.uint64:
    """Bits k < width whose offset inside their ``field``-sized block is in [lo, hi)."""
    hi = field if hi is None else hi
    m = 0
    for k in range(width):
        if lo <= k % field < hi:
            m |= 1 << k
    return np.uint64(m)


class CountingChannel:
    """Stand-in peer that answers every message with zeros."""

    def exchange_round(self, payload: bytes) -> bytes:
        return bytes(len(payload))

    def exchange_reveal(self, payload: bytes) -> bytes:
        return bytes(len(payload))


class CountingTriples:
    """Hands out zero triples and records how many were asked for."""

    def __init__(self):
        self.counts = TripleCounts()

    def take_arith(self, n):
        self.counts.arith += n
        z = np.zeros(n, np.uint32)
        return z, z, z

    def take_bit(self, n):
        self.counts.bit += n
        z = np.zeros(n, np.uint64)
        return z, z, z


def _pack(arrays: Sequence[np.ndarray], dtype) -> bytes:
    if not arrays:
        return b""
    flat = np.concatenate([np.ravel(a) for a in arrays]).astype(dtype, copy=False)
    return flat.astype(np.dtype(dtype).newbyteorder("<"), copy=False).tobytes()


def _unpack(data: bytes, like: Sequence[np.ndarray], dtype) -> list[np.ndarray]:
    flat = np.frombuffer(data, dtype=np.dtype(dtype).newbyteorder("<")).astype(dtype)
    out, off = [], 0
    for a in like:
        out.append(flat[off:off + a.size].reshape(a.shape))
        off += a.size
    if off != flat.size:
        raise ShapeError(f"peer sent {flat.size} lanes, expected {off}")
    return out


class Engine:
    def __init__(self, party_id: int, channel, triples: TripleStore | CountingTriples | None = None):
        if party_id not in (0, 1):
            raise ValueError("party_id must be 0 or 1")
        self.party_id = party_id
        self.channel = channel
        self.triples = triples if triples is not None else TripleStore.empty(party_id)
        self.rounds = 0

    @classmethod
    def counting(cls, party_id: int = 0) -> "Engine":
        return cls(party_id, CountingChannel(), CountingTriples())

    # --- constants ---------------------------------------------------------

    def bool_const(self, value, width: int, shape=None) -> BoolShareVec:
        return BoolShareVec.public(self.party_id, value, width, shape)

    def arith_const(self, value, shape=None) -> ArithShareVec:
        return ArithShareVec.public(self.party_id, value, shape)

    # --- interactive primitives ------------------------------------------

    def _round(self, arrays, dtype):
        self.rounds += 1
        reply = self.channel.exchange_round(_pack(arrays, dtype))
        return _unpack(reply, arrays, dtype)

    def and_many(self, pairs: Sequence[tuple[BoolShareVec, BoolShareVec]]) -> list[BoolShareVec]:
        """Evaluate independent AND gates in one round."""
        if not pairs:
            return []
        for x, y in pairs:
            if x.shape != y.shape:
                raise ShapeError(f"AND shape mismatch {x.shape} vs {y.shape}")
        sizes = [x.bits.size for x, _ in pairs]
        a, b, c = self.triples.take_bit(sum(sizes))
        ds, es, abc, off = [], [], [], 0
        for (x, y), n in zip(pairs, sizes):
            ai = a[off:off + n].reshape(x.shape)
            bi = b[off:off + n].reshape(x.shape)
            ci = c[off:off + n].reshape(x.shape)
            off += n
            ds.append(x.bits ^ ai)
            es.append(y.bits ^ bi)
            abc.append((ai, bi, ci))
        theirs = self._round(ds + es, BOOL_DTYPE)
        k = len(pairs)
        out = []
        for i, ((x, y), (ai, bi, ci)) in enumerate(zip(pairs, abc)):
            d = ds[i] ^ theirs[i]
            e = es[i] ^ theirs[k + i]
            z = ci ^ (d & bi) ^ (e & ai)
            if self.party_id == 0:
                z = z ^ (d & e)
            out.append(BoolShareVec(self.party_id, z, max(x.width, y.width)))
        return out

    def and_(self, x: BoolShareVec, y: BoolShareVec) -> BoolShareVec:
        return self.and_many([(x, y)])[0]

    def mul_many(self, pairs: Sequence[tuple[ArithShareVec, ArithShareVec]]) -> list[ArithShareVec]:
        if not pairs:
            return []
        for x, y in pairs:
            if x.shape != y.shape:
                raise ShapeError(f"MUL shape mismatch {x.shape} vs {y.shape}")
        sizes = [x.values.size for x, _ in pairs]
        a, b, c = self.triples.take_arith(sum(sizes))
        ds, es, abc, off = [], [], [], 0
        for (x, y), n in zip(pairs, sizes):
            ai = a[off:off + n].reshape(x.shape)
            bi = b[off:off + n].reshape(x.shape)
            ci = c[off:off + n].reshape(x.shape)
            off += n
            ds.append(x.values - ai)
            es.append(y.values - bi)
            abc.append((ai, bi, ci))
        theirs = self._round(ds + es, RING_DTYPE)
        k = len(pairs)
        out = []
        for i, (ai, bi, ci) in enumerate(abc):
            d = ds[i] + theirs[i]
            e = es[i] + theirs[k + i]
            z = ci + d * bi + e * ai
            if self.party_id == 0:
                z = z + d * e
            out.append(ArithShareVec(self.party_id, z))
        return out

    def mul(self, x: ArithShareVec, y: ArithShareVec) -> ArithShareVec:
        return self.mul_many([(x, y)])[0]

    def reveal(self, x):
        """Open a share vector to both parties (a REVEAL event)."""
        if isinstance(x, ArithShareVec):
            theirs = _unpack(self.channel.exchange_reveal(_pack([x.values], RING_DTYPE)),
                             [x.values], RING_DTYPE)[0]
            return (x.values + theirs).astype(RING_DTYPE)
        theirs = _unpack(self.channel.exchange_reveal(_pack([x.bits], BOOL_DTYPE)),
                         [x.bits], BOOL_DTYPE)[0]
        return (x.bits ^ theirs) & x.mask

    # --- multiplexers ------------------------------------------------------

    @staticmethod
    def _sel_mask(sel: BoolShareVec, shape) -> BoolShareVec:
        if sel.width != 1:
            raise ShapeError("selector lanes must be 1 bit wide")
        m = sel.expand()
        bits = m.bits.reshape(m.shape + (1,) * (len(shape) - m.bits.ndim))
        return BoolShareVec(sel.party_id, np.broadcast_to(bits, shape).copy(), 64)

    def select_many(self, items: Sequence[tuple[BoolShareVec, BoolShareVec]]) -> list[BoolShareVec]:
        """Lane-wise ``sel ? v : 0`` in one round; ``sel`` broadcasts over trailing axes."""
        return self.and_many([(self._sel_mask(sel, v.shape).with_width(v.width), v)
                              for sel, v in items])

    def mux_many(self, items: Sequence[tuple[BoolShareVec, BoolShareVec, BoolShareVec]]) -> list[BoolShareVec]:
        """Lane-wise ``sel ? t : f`` for Boolean shares, all in one round."""
        for _, t, f in items:
            if t.shape != f.shape:
                raise ShapeError(f"MUX branch shapes differ {t.shape} vs {f.shape}")
        picked = self.select_many([(sel, t ^ f) for sel, t, f in items])
        return [f ^ d for (_, _, f), d in zip(items, picked)]

    def mux(self, sel: BoolShareVec, t, f):
        if isinstance(t, ArithShareVec):
            if t.shape != f.shape:
                raise ShapeError(f"MUX branch shapes differ {t.shape} vs {f.shape}")
            s = self.b2a(sel)
            s = ArithShareVec(s.party_id, np.broadcast_to(
                s.values.reshape(s.shape + (1,) * (t.values.ndim - s.values.ndim)), t.shape).copy())
            return f + self.mul(s, t - f)
        return self.mux_many([(sel, t, f)])[0]

    # --- comparison circuits ----------------------------------------------

    def gt(self, x: BoolShareVec, y: BoolShareVec) -> BoolShareVec:
        """1 iff x > y (unsigned), log-depth prefix comparator."""
        W = next_pow2(max(x.width, y.width))
        xw, yw = x.with_width(W), y.with_width(W)
        E = ~(xw ^ yw)
        G = self.and_(xw, ~yw)
        s = 1
        while s < W:
            if 2 * s < W:
                g2, E = self.and_many([(E, G << s), (E, E << s)])
            else:
                g2 = self.and_(E, G << s)
            G = G ^ g2
            s *= 2
        return G.bit(W - 1)

    def lt(self, x, y):
        return self.gt(y, x)

    def eq(self, x: BoolShareVec, y: BoolShareVec) -> BoolShareVec:
        W = next_pow2(max(x.width, y.width))
        E = ~(x.with_width(W) ^ y.with_width(W))
        s = 1
        while s < W:
            E = self.and_(E, E << s)
            s *= 2
        return E.bit(W - 1)

    # --- trees --------------------------------------------------------------

    def _tree(self, x: BoolShareVec, axis: int, is_or: bool) -> BoolShareVec:
        if x.width != 1:
            raise ShapeError("tree reduction expects 1-bit lanes")
        bits = np.moveaxis(x.bits, axis, -1)
        if bits.shape[-1] == 0:
            raise ValueError("cannot reduce an empty lane set")
        cur = BoolShareVec(x.party_id, bits, 1)
        while cur.shape[-1] > 1:
            n = cur.shape[-1]
            if n % 2:
                pad_val = 0 if is_or else 1
                pad = BoolShareVec.public(self.party_id, pad_val, 1, cur.shape[:-1] + (1,))
                cur = BoolShareVec(x.party_id, np.concatenate([cur.bits, pad.bits], axis=-1), 1)
            a, b = cur[..., 0::2], cur[..., 1::2]
            if is_or:
                cur = ~self.and_(~a, ~b)
            else:
                cur = self.and_(a, b)
        return cur[..., 0]

    def or_tree(self, x: BoolShareVec, axis: int = -1) -> BoolShareVec:
        """OR of all 1-bit lanes along ``axis``; AND depth ceil(log2 n)."""
        return self._tree(x, axis, True)

    def and_tree(self, x: BoolShareVec, axis: int = -1) -> BoolShareVec:
        return self._tree(x, axis, False)

    def or_fold(self, x: BoolShareVec) -> BoolShareVec:
        """OR of all bits inside each packed lane; AND depth ceil(log2 width)."""
        W = next_pow2(x.width)
        cur = x.with_width(W)
        s = W // 2
        while s >= 1:
            cur = ~self.and_(~cur, ~(cur >> s))
            s //= 2
        return cur.bit(0)

    # --- adders -------------------------------------------------------------

    def add_bool(self, x: BoolShareVec, y: BoolShareVec, field: int | None = None) -> BoolShareVec:
        """Boolean addition mod 2^field inside every ``field``-bit block.

        Kogge-Stone carry prefix: one round for generate bits, then one
        round per doubling of the span.
        """
        w = max(x.width, y.width)
        F = field or w
        xw, yw = x.with_width(w), y.with_width(w)
        P = xw ^ yw
        G = self.and_(xw, yw)
        p0 = P
        s = 1
        while s < F:
            m = _field_mask(w, F, s)
            shifted_g = (G << s).and_public(m)
            if 2 * s < F:
                g2, P = self.and_many([(P, shifted_g), (P, (P << s).and_public(m))])
            else:
                g2 = self.and_(P, shifted_g)
            G = G ^ g2
            s *= 2
        carry = (G << 1).and_public(_field_mask(w, F, 1))
        return p0 ^ carry

    def hamming_weight(self, x: BoolShareVec) -> BoolShareVec:
        """Population count of each packed lane, as a ceil(log2(w+1))-bit value."""
        w = x.width
        W = next_pow2(w)
        cur = x.with_width(W)
        f = 1
        while f < W:
            F = 2 * f
            lo = _field_mask(W, F, 0, f)
            cur = self.add_bool(cur.and_public(lo), (cur >> f).and_public(lo), field=F)
            f = F
        return cur.with_width(max(1, math.ceil(math.log2(w + 1))))

    # --- conversions --------------------------------------------------------

    def a2b(self, x: ArithShareVec, bits: int = RING_BITS) -> BoolShareVec:
        """Arithmetic to Boolean. With ``bits`` < 32 only the low bits are
        produced, which is exact whenever the value is known to fit."""
        own = x.values.astype(BOOL_DTYPE)
        zero = np.zeros_like(own)
        u = BoolShareVec(self.party_id, own if self.party_id == 0 else zero, bits)
        v = BoolShareVec(self.party_id, own if self.party_id == 1 else zero, bits)
        return self.add_bool(u, v)

    def b2a(self, x: BoolShareVec) -> ArithShareVec:
        """x = sum_i 2^i (u_i + v_i - 2 u_i v_i) with u, v the two parties' bits."""
        w = x.width
        shifts = np.arange(w, dtype=BOOL_DTYPE)
        own = ((x.bits[..., None] >> shifts) & np.uint64(1)).astype(RING_DTYPE)
        zero = np.zeros_like(own)
        u = ArithShareVec(self.party_id, own if self.party_id == 0 else zero)
        v = ArithShareVec(self.party_id, own if self.party_id == 1 else zero)
        prod = self.mul(u, v)
        weights = (np.uint64(1) << shifts).astype(RING_DTYPE)
        terms = (own - prod.values * RING_DTYPE(2)) * weights
        return ArithShareVec(self.party_id, terms.sum(axis=-1, dtype=RING_DTYPE))


def demand(fn, *args, party_id: int = 0, **kwargs) -> TripleCounts:
    """Triple demand of ``fn(engine, *args, **kwargs)``, measured by a dry run."""
    eng = Engine.counting(party_id)
    fn(eng, *args, **kwargs)
    return eng.triples.counts
