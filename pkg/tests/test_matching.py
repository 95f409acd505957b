import itertools

import numpy as np
import pytest

from kepmpc.domain import ClassWeights, CriteriaWeights, HlaVector, encode_blood_group
from kepmpc.generate import Prevalence, gen_cohort
from kepmpc.mpc import share
from kepmpc.oracle import compatibility_matrix, crossmatch_ok, edge_weight, score_abo, score_hla
from kepmpc.protocols.inputs import SharedCohort, encode_table, share_table
from kepmpc.protocols.matching import (
    compute_compatibility_graph, eval_abo, eval_age, eval_hla, eval_sex, eval_weight, match_hla,
)

from conftest import make_pair, opened, run_pair

# distinctive class weights so every bin is identifiable
CW = CriteriaWeights(w=(1, 1, 1, 1, 1), class_weights=ClassWeights(A=7, B=4, C=2))
A, B, C = 7, 4, 2

# who may donate to whom, written out from the blood-group donation table
ABO_TABLE = {
    "O": {"O", "A", "B", "AB"},
    "A": {"A", "AB"},
    "B": {"B", "AB"},
    "AB": {"AB"},
}


def secure(fn, xd, xr, width, seed=0):
    """Evaluate ``fn(eng, donor, recipient, CW)`` on shared lanes; open the result."""
    rng = np.random.default_rng(seed)
    d = share(np.asarray(xd, dtype=np.uint64), "B", rng, width)
    r = share(np.asarray(xr, dtype=np.uint64), "B", rng, width)
    out, _, _ = run_pair(lambda e, p: fn(e, d[p], r[p], CW))
    return [int(v) for v in opened(out)]


def test_abo_all_sixteen_combinations():
    groups = list(ABO_TABLE)
    combos = list(itertools.product(groups, groups))
    got = secure(eval_abo, [encode_blood_group(d) for d, _ in combos],
                 [encode_blood_group(r) for _, r in combos], 2)
    expected = [A if r in ABO_TABLE[d] else 0 for d, r in combos]
    assert got == expected
    assert [score_abo(encode_blood_group(d), encode_blood_group(r), CW) for d, r in combos] == expected


def test_abo_named_cases():
    assert secure(eval_abo, [0] * 4, [0, 1, 2, 3], 2) == [A] * 4
    assert secure(eval_abo, [3], [0], 2) == [0]


@pytest.mark.parametrize("donor,recipient,score", [
    (0, 0, A),   # junior to junior
    (1, 1, A),   # senior to senior
    (0, 1, B),   # junior donor, senior recipient
    (1, 0, 0),   # senior donor, junior recipient
])
def test_age_orderings(donor, recipient, score):
    assert secure(eval_age, [donor], [recipient], 1) == [score]


@pytest.mark.parametrize("donor,recipient,score", [
    (1, 1, A),   # F to F
    (0, 0, A),   # M to M
    (0, 1, B),   # M donor, F recipient
    (1, 0, 0),   # F donor, M recipient
])
def test_sex_orderings(donor, recipient, score):
    assert secure(eval_sex, [donor], [recipient], 1) == [score]


def test_weight_rule():
    assert secure(eval_weight, [80, 60, 70], [70, 70, 70], 16) == [A, 0, A]


def test_hla_mismatch_bins():
    typing_r = [0] * 7
    typing_d = [(1 << s) - 1 for s in range(7)]
    expected = [A, B, B, C, C, 0, 0]
    assert secure(eval_hla, typing_d, typing_r, 50) == expected
    bits = lambda v: [bool(v >> k & 1) for k in range(50)]
    assert [score_hla(bits(d), bits(0), CW) for d in typing_d] == expected


def test_hla_bins_fuzz(rng):
    d = rng.integers(0, 1 << 50, 300, dtype=np.uint64)
    flips = [sum(1 << int(k) for k in rng.choice(50, size=rng.integers(0, 9), replace=False))
             for _ in range(300)]
    r = d ^ np.array(flips, dtype=np.uint64)
    s = [bin(f).count("1") for f in flips]
    expected = [A if x == 0 else B if x <= 2 else C if x <= 4 else 0 for x in s]
    assert secure(eval_hla, d, r, 50, seed=5) == expected


def test_crossmatch_examples():
    hit = 1 << 7
    assert secure(lambda e, d, r, cw: match_hla(e, d, r), [0, hit, hit], [hit, hit, 1 << 8], 50) == [1, 0, 1]


def test_crossmatch_fuzz(rng):
    d = rng.integers(0, 1 << 50, 300, dtype=np.uint64) & rng.integers(0, 1 << 50, 300, dtype=np.uint64)
    r = rng.integers(0, 1 << 50, 300, dtype=np.uint64) & rng.integers(0, 1 << 50, 300, dtype=np.uint64)
    expected = [int((int(x) & int(y)) == 0) for x, y in zip(d, r)]
    assert secure(lambda e, x, y, cw: match_hla(e, x, y), d, r, 50, seed=2) == expected


def graph(pairs, cw, seed=0):
    tables = share_table(encode_table(pairs), np.random.default_rng(seed))
    out, _, _ = run_pair(lambda e, p: compute_compatibility_graph(e, SharedCohort(p, tables[p]), cw).entries)
    return opened(out).astype(np.int64)


def test_crossmatch_dominates_other_criteria():
    antigen = HlaVector.from_antigens(["A24"])
    pairs = [make_pair(donor_hla=antigen, recipient_ahla=antigen), make_pair(donor_hla=antigen, recipient_ahla=antigen)]
    assert graph(pairs, CW).tolist() == [[0, 0], [0, 0]]


def test_base_weight_when_every_criterion_scores_zero():
    typing = HlaVector.from_bits([True] * 6 + [False] * 44)
    donor = make_pair(donor_bg=encode_blood_group("AB"), donor_age=1, donor_sex=1, donor_weight=50,
                      donor_hla_typing=typing, recipient_weight=50)
    recipient = make_pair(recipient_bg=0, recipient_age=0, recipient_sex=0, recipient_weight=90)
    assert edge_weight(donor, recipient, CW) == 1
    assert graph([donor, recipient], CW)[0, 1] == 1


def test_diagonal_is_zero_and_graph_matches_scorer():
    for seed in range(4):
        pairs = gen_cohort(6, seed, Prevalence(antibody=0.05))
        g = graph(pairs, CW, seed)
        assert g.tolist() == compatibility_matrix(pairs, CW)
        assert not np.diag(g).any()


def test_zero_antibodies_never_block():
    pairs = gen_cohort(8, 3, Prevalence(antibody=0.0))
    assert all(crossmatch_ok(a.donor_hla.bits, b.recipient_ahla.bits) for a in pairs for b in pairs)
    edges = compatibility_matrix(pairs, CW)
    assert all(edges[i][j] > 0 for i in range(8) for j in range(8) if i != j)
