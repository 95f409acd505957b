"""Medical compatibility scoring and the weighted compatibility graph.

All criteria are evaluated for every ordered (donor i, recipient j) pair with
i != j at once, one SIMD lane per pair. The class-weight multiplexers select
between public constants, so they reduce to masking and cost no rounds; only
the conditions feeding them are interactive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..domain import CriteriaWeights
from ..mpc.engine import Engine
from ..mpc.shares import ArithShareVec, BoolShareVec, concat
from .inputs import SharedCohort


@dataclass
class WeightedCompatGraph:
    n: int
    entries: ArithShareVec  # (n, n); 0 means no edge, diagonal is 0


def off_diagonal(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-major (i, j) index arrays of all ordered pairs with i != j."""
    i, j = np.nonzero(~np.eye(n, dtype=bool))
    return i, j


def pick(bit: BoolShareVec, value: int, width: int) -> BoolShareVec:
    """``bit ? value : 0`` for a public ``value``. Local."""
    mask = np.uint64(0) - (bit.bits & np.uint64(1))
    return BoolShareVec(bit.party_id, mask & np.uint64(value), width)


def _const_like(eng: Engine, value: int, x: BoolShareVec) -> BoolShareVec:
    return eng.bool_const(value, x.width, x.shape)


def match_hla(eng: Engine, hla_d: BoolShareVec, ahla_r: BoolShareVec) -> BoolShareVec:
    """1 when no donor antigen meets a recipient antibody."""
    hits = eng.and_(hla_d, ahla_r)
    return ~eng.or_fold(hits)


def eval_hla(eng: Engine, typing_d: BoolShareVec, typing_r: BoolShareVec,
             cw: CriteriaWeights) -> BoolShareVec:
    """Mismatch bins: 0 -> A, 1..2 -> B, 3..4 -> C, 5 or more -> 0."""
    A, B, C = cw.class_weights.A, cw.class_weights.B, cw.class_weights.C
    s = eng.hamming_weight(typing_d ^ typing_r)
    s = s.with_width(max(s.width, 3))  # room for the bin bounds
    n = s.shape[0]
    bounds = concat([_const_like(eng, 5, s), _const_like(eng, 3, s)])
    lt = eng.gt(bounds, concat([s, s]))
    lt5, lt3 = lt[:n], lt[n:]
    eq0 = eng.eq(s, _const_like(eng, 0, s))
    # eq0 implies lt3 implies lt5, so the nested multiplexer collapses to XOR
    width = A.bit_length()
    return pick(lt5, C, width) ^ pick(lt3, B ^ C, width) ^ pick(eq0, A ^ B, width)


def eval_abo(eng: Engine, bg_d: BoolShareVec, bg_r: BoolShareVec,
             cw: CriteriaWeights) -> BoolShareVec:
    d0, d1 = bg_d.bit(0), bg_d.bit(1)
    r0, r1 = bg_r.bit(0), bg_r.bit(1)
    x, y, same = eng.and_many([(r1, ~d0), (r0, ~d1), (~(r0 ^ d0), ~(r1 ^ d1))])
    incompatible = eng.and_(eng.and_(~same, ~x), ~y)
    A = cw.class_weights.A
    return pick(~incompatible, A, A.bit_length())


def eval_age(eng: Engine, a_d: BoolShareVec, a_r: BoolShareVec,
             cw: CriteriaWeights) -> BoolShareVec:
    """Same group -> A, junior donor to senior recipient -> B, else 0."""
    young_to_old = eng.and_(~a_d, a_r)
    same = ~(a_d ^ a_r)
    A, B = cw.class_weights.A, cw.class_weights.B
    w = A.bit_length()
    return pick(same, A, w) ^ pick(young_to_old, B, w)


def eval_sex(eng: Engine, s_d: BoolShareVec, s_r: BoolShareVec,
             cw: CriteriaWeights) -> BoolShareVec:
    """Same sex -> A, male donor to female recipient -> B, female to male -> 0."""
    fdmr = eng.and_(s_d, ~s_r)
    same = ~(s_d ^ s_r)
    A, B = cw.class_weights.A, cw.class_weights.B
    w = A.bit_length()
    return pick(same, A, w) ^ pick(~same ^ fdmr, B, w)


def eval_weight(eng: Engine, w_d: BoolShareVec, w_r: BoolShareVec,
                cw: CriteriaWeights) -> BoolShareVec:
    lighter = eng.gt(w_r, w_d)
    A = cw.class_weights.A
    return pick(~lighter, A, A.bit_length())


def compute_compatibility_graph(eng: Engine, cohort: SharedCohort,
                                cw: CriteriaWeights) -> WeightedCompatGraph:
    """entry[i][j] = match ? 1 + sum_k w[k] * eval_k : 0, diagonal 0."""
    n = cohort.n
    I, J = off_diagonal(n)

    def donor(name):
        return cohort.field(name)[I]

    def recipient(name):
        return cohort.field(name)[J]

    match = match_hla(eng, donor("donor_hla"), recipient("recipient_ahla"))
    scores = [
        eval_hla(eng, donor("donor_typing"), recipient("recipient_typing"), cw),
        eval_abo(eng, donor("donor_bg"), recipient("recipient_bg"), cw),
        eval_age(eng, donor("donor_age"), recipient("recipient_age"), cw),
        eval_sex(eng, donor("donor_sex"), recipient("recipient_sex"), cw),
        eval_weight(eng, donor("donor_weight"), recipient("recipient_weight"), cw),
    ]
    P = len(I)
    arith = eng.b2a(concat(scores + [match]))
    edge = eng.arith_const(1, (P,))
    for k, wk in enumerate(cw.w):
        edge = edge + arith[k * P:(k + 1) * P].scale(wk)
    gated = eng.mul(arith[5 * P:], edge)

    full = np.zeros((n, n), dtype=np.uint32)
    full[I, J] = gated.values
    return WeightedCompatGraph(n, ArithShareVec(eng.party_id, full))
