"""Greedy disjoint packing of the unique cycles.

Every unique cycle anchors one candidate set. All anchors advance together as
SIMD lanes: at step j each anchor tests cycle j against its set so far and
appends either cycle j or the dummy cycle. The anchor's own step appends the
dummy, which leaves the set unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mpc.engine import Engine
from ..mpc.shares import ArithShareVec, BoolShareVec, concat, stack
from .cycles import CycleCandidates, vertex_width


@dataclass
class SolutionSet:
    """``slots`` (m, L) vertex lists, dummies included; ``total_weight`` (1,)."""

    slots: BoolShareVec
    total_weight: BoolShareVec


def disjoint_set(eng: Engine, cycles: BoolShareVec, cand: BoolShareVec) -> BoolShareVec:
    """1 iff ``cand`` shares no vertex with any cycle of the set.

    ``cycles`` is (..., count, L) and ``cand`` is (..., L); leading axes are
    independent lanes.
    """
    count, L = cycles.shape[-2], cycles.shape[-1]
    lead = cycles.shape[:-2]
    lhs = np.broadcast_to(cycles.bits[..., :, :, None], lead + (count, L, L))
    rhs = np.broadcast_to(cand.bits[..., None, None, :], lead + (count, L, L))
    width = max(cycles.width, cand.width)
    same = eng.eq(BoolShareVec(cycles.party_id, lhs.copy(), width),
                  BoolShareVec(cand.party_id, rhs.copy(), width))
    hit = eng.or_tree(same.reshape(lead + (count * L * L,)), axis=-1)
    return ~hit


def find_maximum_set(eng: Engine, weights: BoolShareVec, sets: BoolShareVec,
                     n_pairs: int) -> SolutionSet:
    """The first set whose weight is a strict maximum above 0.

    Equivalent to a sequential scan keeping the best so far under a strict
    ``>``: set i wins iff it beats 0, beats every earlier set and is not beaten
    by any later one. All comparisons run in one batch.
    """
    m = weights.shape[0]
    L = sets.shape[-1]
    wi = np.broadcast_to(weights.bits[:, None], (m, m)).reshape(-1)
    wj = np.broadcast_to(weights.bits[None, :], (m, m)).reshape(-1)
    pid, width = weights.party_id, weights.width
    x = concat([BoolShareVec(pid, wi.copy(), width), weights])
    y = concat([BoolShareVec(pid, wj.copy(), width), eng.bool_const(0, width, (m,))])
    g = eng.gt(x, y)
    beats = g.bits[:m * m].reshape(m, m)          # beats[i, j] = w_i > w_j
    positive = g.bits[m * m:]
    not_beaten = (~g[:m * m]).bits.reshape(m, m).T  # [i, j] = not (w_j > w_i)
    lower = np.tri(m, k=-1, dtype=bool)
    grid = np.where(lower, beats, not_beaten)
    grid[np.arange(m), np.arange(m)] = positive
    win = eng.and_tree(BoolShareVec(pid, grid, 1), axis=-1)

    dummy = eng.bool_const(n_pairs, sets.width, sets.shape)
    picked_sets, picked_w = eng.select_many([(win, sets ^ dummy), (win, weights)])
    slots = BoolShareVec(pid, np.bitwise_xor.reduce(picked_sets.bits, axis=0), sets.width)
    slots = slots ^ eng.bool_const(n_pairs, sets.width, slots.shape)
    total = BoolShareVec(pid, np.bitwise_xor.reduce(picked_w.bits, axis=0, keepdims=True), width)
    return SolutionSet(slots.reshape(-1, L), total)


def _pack_rows(bits: np.ndarray, words: int) -> np.ndarray:
    """Pack 1-bit lanes along the last axis, 64 per word (lane k -> word k//64, bit k%64)."""
    m = bits.shape[-1]
    padded = np.zeros(bits.shape[:-1] + (words * 64,), dtype=np.uint64)
    padded[..., :m] = bits & np.uint64(1)
    chunks = padded.reshape(bits.shape[:-1] + (words, 64))
    return np.bitwise_or.reduce(chunks << np.arange(64, dtype=np.uint64), axis=-1)


def eval_solution(eng: Engine, unique: CycleCandidates, n_pairs: int,
                  set_bits: int) -> SolutionSet:
    """Best anchored greedy packing; a set's weight is the sum of its cycles.

    Pairwise conflicts between unique cycles are computed once with
    :func:`disjoint_set`. Each anchor then keeps a bitmap of the cycles it has
    taken, so testing cycle j against the anchor's set is one AND with column
    j of the conflict matrix followed by an OR reduction.
    """
    m, L = unique.vertices.shape
    vw = vertex_width(n_pairs)
    if m == 0:
        return SolutionSet(eng.bool_const(n_pairs, vw, (0, L)), eng.bool_const(0, set_bits, (1,)))
    pid = eng.party_id
    V = unique.vertices
    members = BoolShareVec(pid, np.broadcast_to(V.bits[:, None, None, :], (m, m, 1, L)).copy(), vw)
    cands = BoolShareVec(pid, np.broadcast_to(V.bits[None, :, :], (m, m, L)).copy(), vw)
    conflict = ~disjoint_set(eng, members, cands)                 # [a, b]: a and b meet

    words = -(-m // 64)
    width = min(64, m)
    col = _pack_rows(conflict.bits.T, words)                       # (m, words): column j packed
    onehot = _pack_rows(np.eye(m, dtype=np.uint64), words)         # (m, words)
    taken = eng.bool_const(onehot, width)                          # anchor i starts with itself
    disjoint = []
    for j in range(m):
        cj = BoolShareVec(pid, np.broadcast_to(col[j], (m, words)).copy(), width)
        hit = eng.or_fold(eng.and_(taken, cj))
        if words > 1:
            hit = eng.or_tree(hit, axis=-1)
        else:
            hit = hit[:, 0]
        d = (~hit).and_public((np.arange(m) != j).astype(np.uint64))
        (add,) = eng.select_many([(d, eng.bool_const(onehot[j], width, (m, words)))])
        taken = taken ^ add
        disjoint.append(d)
    dmat = stack(disjoint, axis=1)                                 # (anchor, j)

    w = eng.b2a(unique.weights)
    da = eng.b2a(dmat)
    wj = ArithShareVec(pid, np.broadcast_to(w.values[None, :], (m, m)).copy())
    set_w = eng.mul(da, wj).sum(axis=1) + w

    dummy = eng.bool_const(n_pairs, vw, (m, m, L))
    moved = BoolShareVec(pid, np.broadcast_to(V.bits[None, :, :], (m, m, L)).copy(), vw) ^ dummy
    (app,) = eng.select_many([(dmat, moved)])
    sets = concat([BoolShareVec(pid, V.bits[:, None, :], vw), app ^ dummy], axis=1)  # (anchor, m+1, L)
    return find_maximum_set(eng, eng.a2b(set_w, set_bits), sets, n_pairs)
