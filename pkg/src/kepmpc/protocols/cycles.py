"""Cycle counting and cycle evaluation.

Candidate cycles are the ordered tuples of distinct vertices, enumerated with
the anchor ascending and each extension ascending. The tuples themselves are
public; only their weights and, after sorting, their positions are secret.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ..mpc.engine import Engine
from ..mpc.shares import ArithShareVec, BoolShareVec, concat


@dataclass
class CycleCandidates:
    """A batch of candidates: ``weights`` (m,) and ``vertices`` (m, L)."""

    weights: BoolShareVec
    vertices: BoolShareVec

    def __len__(self):
        return self.weights.shape[0]


def total_cycles(n_pairs: int, cycle_len: int) -> int:
    """Number of ordered tuples of ``cycle_len`` distinct vertices."""
    return math.perm(n_pairs, cycle_len)


def vertex_width(n_pairs: int) -> int:
    """Bits per vertex lane; the dummy sentinel ``n_pairs`` must fit."""
    return max(1, n_pairs.bit_length())


def candidate_tuples(n_pairs: int, cycle_len: int) -> np.ndarray:
    tuples = list(itertools.permutations(range(n_pairs), cycle_len))
    return np.array(tuples, dtype=np.int64).reshape(len(tuples), cycle_len)


def remove_weights(eng: Engine, entries: ArithShareVec, bits: int = 32) -> ArithShareVec:
    """Unweighted graph: 1 where the (non-negative) entry is > 0, else 0.

    ``bits`` bounds the entries so the conversion can stop early.
    """
    b = eng.a2b(entries, bits)
    return eng.b2a(eng.or_fold(b))


def _matmul(eng: Engine, x: ArithShareVec, y: ArithShareVec) -> ArithShareVec:
    n = x.shape[0]
    lhs = ArithShareVec(x.party_id, np.broadcast_to(x.values[:, :, None], (n, n, n)).copy())
    rhs = ArithShareVec(y.party_id, np.broadcast_to(y.values[None, :, :], (n, n, n)).copy())
    return eng.mul(lhs, rhs).sum(axis=1)


def count_closed_walks(eng: Engine, unweighted: ArithShareVec, cycle_len: int) -> ArithShareVec:
    """trace(U^L) as a single shared value, by naive matrix products."""
    power = unweighted
    for _ in range(cycle_len - 2):
        power = _matmul(eng, power, unweighted)
    # only the diagonal of the last product is needed
    t = ArithShareVec(unweighted.party_id, unweighted.values.T.copy())
    return eng.mul(power, t).sum().reshape(1)


def determine_number_cycles(eng: Engine, unweighted: ArithShareVec, cycle_len: int,
                            reveal_guard: bool = False) -> int:
    """Reveal the number of closed L-walks.

    With ``reveal_guard`` the count is only opened when it exceeds ``cycle_len``
    (more than one cycle); otherwise 0 is opened and no cycle is evaluated.
    """
    count = count_closed_walks(eng, unweighted, cycle_len)
    if not reveal_guard:
        return int(eng.reveal(count)[0])
    n = unweighted.shape[0]
    bits = min(32, max(n * (n - 1) ** (cycle_len - 1), cycle_len + 1).bit_length())
    b = eng.a2b(count, bits)
    enough = eng.gt(b, eng.bool_const(cycle_len, bits, b.shape))
    (opened,) = eng.select_many([(enough, b)])
    return int(eng.reveal(opened)[0])


def find_cycles(eng: Engine, entries: ArithShareVec, unweighted: ArithShareVec,
                cycle_len: int, weight_bits: int) -> CycleCandidates:
    """Every ordered L-tuple with its weight, or weight 0 unless all L edges exist.

    The running sums that a depth-first enumeration adds and reverts edge by
    edge equal, at each leaf, the plain sum over the tuple's edges; that sum
    is formed directly here.
    """
    n = entries.shape[0]
    vw = vertex_width(n)
    tuples = candidate_tuples(n, cycle_len)
    m = len(tuples)
    if m == 0:
        return CycleCandidates(eng.bool_const(0, weight_bits, (0,)),
                               eng.bool_const(0, vw, (0, cycle_len)))
    src, dst = tuples, np.roll(tuples, -1, axis=1)
    weight = ArithShareVec(eng.party_id, entries.values[src, dst].sum(axis=1, dtype=np.uint32))
    valid = ArithShareVec(eng.party_id, unweighted.values[src, dst].sum(axis=1, dtype=np.uint32))

    both = eng.a2b(concat([weight, valid]), max(weight_bits, cycle_len.bit_length()))
    wb, vb = both[:m].with_width(weight_bits), both[m:].with_width(cycle_len.bit_length())
    closed = eng.eq(vb, eng.bool_const(cycle_len, vb.width, vb.shape))
    (cweight,) = eng.select_many([(closed, wb)])
    verts = eng.bool_const(tuples.astype(np.uint64), vw)
    return CycleCandidates(cweight, verts)


def _shift_down(x: BoolShareVec) -> BoolShareVec:
    """Lane j takes lane j-1; lane 0 keeps its own value."""
    bits = np.concatenate([x.bits[:1], x.bits[:-1]], axis=0)
    return BoolShareVec(x.party_id, bits, x.width)


def _repeat(x: BoolShareVec, k: int) -> BoolShareVec:
    return BoolShareVec(x.party_id, np.broadcast_to(x.bits, (k,) + x.shape).copy(), x.width)


def knn_sort(eng: Engine, cands: CycleCandidates, k: int, n_pairs: int) -> CycleCandidates:
    """The ``k`` heaviest candidates, heaviest first.

    Candidates are inserted one at a time into a sorted list of ``k`` slots
    initialised to (0, dummy). A newcomer moves above every slot it strictly
    beats, so among equal weights the earlier candidate stays ahead. All
    slots are compared at once and shifted in a single multiplexer round.
    """
    L = cands.vertices.shape[1]
    wbits, vw = cands.weights.width, vertex_width(n_pairs)
    W = eng.bool_const(0, wbits, (k,))
    V = eng.bool_const(n_pairs, vw, (k, L))
    if k == 0:
        return CycleCandidates(W, V)
    for t in range(len(cands)):
        x = _repeat(cands.weights[t], k)
        xv = _repeat(cands.vertices[t], k)
        g = eng.gt(x, W)
        gp = BoolShareVec(g.party_id, np.concatenate([np.zeros(1, np.uint64), g.bits[:-1]]), 1)
        Wp, Vp = _shift_down(W), _shift_down(V)
        a, b, c, d = eng.select_many([(g, x ^ W), (gp, Wp ^ x), (g, xv ^ V), (gp, Vp ^ xv)])
        W = W ^ a ^ b
        V = V ^ c ^ d
    return CycleCandidates(W, V)


def remove_duplicates(eng: Engine, cands: CycleCandidates, n_unique: int,
                      n_pairs: int) -> CycleCandidates:
    """Zero every candidate that is a rotation of an earlier one, keep the
    ``n_unique`` heaviest."""
    K, L = cands.vertices.shape
    if K > 1 and L > 1:
        ii, jj = np.nonzero(np.tri(K, k=-1, dtype=bool))   # j < i
        V = cands.vertices.bits
        rot = np.stack([np.roll(V, -s, axis=1) for s in range(1, L)], axis=1)  # (K, L-1, L)
        lhs = np.broadcast_to(V[ii][:, None, :], (len(ii), L - 1, L))
        rhs = rot[jj]
        pid, vw = cands.vertices.party_id, cands.vertices.width
        same = eng.eq(BoolShareVec(pid, lhs.copy(), vw), BoolShareVec(pid, rhs.copy(), vw))
        rotation_equal = eng.and_tree(same, axis=-1)             # (pairs, L-1)
        grid = np.zeros((K, K, L - 1), dtype=np.uint64)
        grid[ii, jj] = rotation_equal.bits
        dup = eng.or_tree(BoolShareVec(pid, grid.reshape(K, K * (L - 1)), 1), axis=-1)
        (drop,) = eng.select_many([(dup, cands.weights)])
        cands = CycleCandidates(cands.weights ^ drop, cands.vertices)
    return knn_sort(eng, cands, n_unique, n_pairs)


def evaluate_cycles(eng: Engine, entries: ArithShareVec, unweighted: ArithShareVec,
                    cycle_len: int, n_cycles: int, weight_bits: int) -> CycleCandidates:
    n = entries.shape[0]
    found = find_cycles(eng, entries, unweighted, cycle_len, weight_bits)
    ranked = knn_sort(eng, found, n_cycles, n)
    return remove_duplicates(eng, ranked, n_cycles // cycle_len, n)
