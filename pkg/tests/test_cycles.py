import numpy as np
import pytest

from kepmpc import oracle
from kepmpc.domain import CriteriaWeights
from kepmpc.generate import Prevalence, gen_cohort
from kepmpc.mpc import share
from kepmpc.protocols.cycles import (
    CycleCandidates, candidate_tuples, determine_number_cycles, evaluate_cycles, find_cycles,
    knn_sort, remove_duplicates, remove_weights, total_cycles, vertex_width,
)

from conftest import opened, run_pair

COMPLETE3 = [[0, 1, 1], [1, 0, 1], [1, 1, 0]]


def shared_matrix(m, seed=0):
    return share(np.asarray(m, dtype=np.uint64), "A", np.random.default_rng(seed))


def shared_cands(weights, tuples, n, wbits=8, seed=0):
    rng = np.random.default_rng(seed)
    w = share(np.asarray(weights, dtype=np.uint64), "B", rng, wbits)
    v = share(np.asarray(tuples, dtype=np.uint64).reshape(len(tuples), -1), "B", rng, vertex_width(n))
    return [CycleCandidates(w[p], v[p]) for p in (0, 1)]


def open_cands(out):
    w = opened([o.weights for o in out])
    v = opened([o.vertices for o in out])
    return [(int(a), tuple(int(x) for x in row)) for a, row in zip(w, v)]


def count(m, L, guard=False):
    U = shared_matrix(m)
    out, _, _ = run_pair(lambda e, p: determine_number_cycles(e, U[p], L, guard))
    assert out[0] == out[1]
    return out[0]


@pytest.mark.parametrize("n,L,expected", [(4, 2, 12), (5, 3, 60), (2, 3, 0)])
def test_total_cycles(n, L, expected):
    assert total_cycles(n, L) == expected == len(candidate_tuples(n, L))


def test_remove_weights():
    m = [[0, 17, 0], [3, 0, 1 << 20], [0, 0, 0]]
    E = shared_matrix(m)
    out, _, _ = run_pair(lambda e, p: remove_weights(e, E[p], 21))
    assert opened(out).tolist() == [[0, 1, 0], [1, 0, 1], [0, 0, 0]]
    Z = shared_matrix(np.zeros((3, 3)))
    out, _, _ = run_pair(lambda e, p: remove_weights(e, Z[p], 8))
    assert not opened(out).any()


def test_cycle_count_examples():
    assert count([[0, 1], [1, 0]], 2) == 2
    assert count(COMPLETE3, 2) == 6
    assert count(COMPLETE3, 3) == 6
    assert count(np.zeros((4, 4)), 2) == 0


def test_cycle_count_matches_trace(rng):
    for _ in range(10):
        n = int(rng.integers(2, 7))
        adj = (rng.random((n, n)) < 0.5).astype(int)
        np.fill_diagonal(adj, 0)
        for L in (2, 3):
            assert count(adj, L) == oracle.trace_power(adj.tolist(), L)


def test_reveal_guard_hides_single_cycle():
    mutual = [[0, 1], [1, 0]]
    assert count(mutual, 2, guard=True) == 0
    assert count(COMPLETE3, 2, guard=True) == 6


def find(m, L, wbits=8):
    E = shared_matrix(m)
    U = shared_matrix((np.asarray(m) > 0).astype(int), seed=1)
    out, _, _ = run_pair(lambda e, p: find_cycles(e, E[p], U[p], L, wbits))
    return open_cands(out)


def test_find_cycles_weights():
    got = find([[0, 5, 0], [7, 0, 2], [0, 0, 0]], 2)
    assert got == [(12, (0, 1)), (0, (0, 2)), (12, (1, 0)), (0, (1, 2)), (0, (2, 0)), (0, (2, 1))]


def test_open_cycle_has_zero_weight():
    got = dict((t, w) for w, t in find([[0, 3, 0], [0, 0, 4], [0, 0, 0]], 3))
    assert got[(0, 1, 2)] == 0


def test_find_cycles_candidate_count():
    assert len(find(np.ones((5, 5)) - np.eye(5), 3)) == 60


def knn(weights, k, n=3):
    tuples = [(i, i) for i in range(len(weights))]
    c = shared_cands(weights, tuples, n)
    out, _, _ = run_pair(lambda e, p: knn_sort(e, c[p], k, n))
    return open_cands(out)


def test_knn_examples():
    assert knn([3, 9, 1], 2) == [(9, (1, 1)), (3, (0, 0))]
    assert knn([3, 9], 4) == [(9, (1, 1)), (3, (0, 0)), (0, (3, 3)), (0, (3, 3))]


def test_knn_ties_keep_first():
    assert knn([5, 5, 5], 2) == [(5, (0, 0)), (5, (1, 1))]


def test_knn_fuzz(rng):
    for _ in range(5):
        w = rng.integers(0, 12, 15).tolist()
        k = int(rng.integers(1, 18))
        tuples = [(i, i) for i in range(15)]
        expected = oracle.knn(list(zip(w, map(tuple, tuples))), k, (16, 16))
        assert knn(w, k, n=16) == expected


def dedupe(weights, tuples, n_unique, n):
    c = shared_cands(weights, tuples, n)
    out, _, _ = run_pair(lambda e, p: remove_duplicates(e, c[p], n_unique, n))
    return open_cands(out)


def test_two_cycle_rotation_removed():
    assert dedupe([8, 8], [(0, 1), (1, 0)], 1, 2) == [(8, (0, 1))]


def test_reflection_is_not_a_duplicate():
    got = dedupe([6, 6, 6], [(0, 1, 2), (2, 1, 0), (1, 2, 0)], 3, 3)
    assert got == [(6, (0, 1, 2)), (6, (2, 1, 0)), (0, (3, 3, 3))]


def test_six_duplicate_inclusive_give_three():
    tuples = [(0, 1), (1, 0), (2, 3), (3, 2), (4, 5), (5, 4)]
    got = dedupe([9, 9, 7, 7, 5, 5], tuples, 6 // 2, 6)
    assert got == [(9, (0, 1)), (7, (2, 3)), (5, (4, 5))]


def evaluate(m, L):
    U = (np.asarray(m) > 0).astype(int)
    walks = oracle.trace_power(U.tolist(), L)
    E, Us = shared_matrix(m), shared_matrix(U, seed=1)
    out, _, _ = run_pair(lambda e, p: evaluate_cycles(e, E[p], Us[p], L, walks, 8))
    return open_cands(out)


def test_evaluate_empty_and_single():
    assert evaluate(np.zeros((3, 3)), 2) == []
    assert evaluate([[0, 4, 0], [6, 0, 0], [0, 0, 0]], 2) == [(10, (0, 1))]


def test_evaluate_matches_oracle_intermediates():
    for seed in range(4):
        pairs = gen_cohort(5, seed, Prevalence(antibody=0.05))
        for L in (2, 3):
            res = oracle.oracle_pipeline(pairs, CriteriaWeights(), L)
            got = evaluate(res.edges, L) if res.revealed_cycle_count else []
            assert got == [(w, tuple(c)) for w, c in res.unique]
