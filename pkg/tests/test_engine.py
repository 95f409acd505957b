import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from kepmpc.mpc import (
    ArithShareVec, BoolShareVec, Engine, SetupUnderprovisioned, TripleCounts, TripleStore,
    dealer_generate, demand, reconstruct, share,
)
from kepmpc.mpc.shares import concat, pack_lanes, stack

from conftest import opened, run_pair

M32 = 1 << 32


def sh(value, domain="A", width=32, seed=0):
    return share(np.atleast_1d(np.asarray(value, dtype=np.uint64)), domain,
                 np.random.default_rng(seed), width)


# --- sharing --------------------------------------------------------------------

def test_share_zero_reconstructs():
    assert reconstruct(*sh(0))[0] == 0


def test_arith_share_fuzz(rng):
    x = rng.integers(0, M32, 1000, dtype=np.uint64)
    assert np.array_equal(reconstruct(*share(x, "A", rng)), x.astype(np.uint32))


def test_bool_share_bit():
    assert reconstruct(*sh(1, "B", 1))[0] == 1


def test_share_marginal_uniformity():
    """One party's share of a constant is uniform: chi-squared on 256 buckets."""
    s0, _ = share(np.full(100_000, 7, dtype=np.uint64), "A", np.random.default_rng(3))
    counts = np.bincount((s0.values >> 24).astype(np.int64), minlength=256)
    assert stats.chisquare(counts).pvalue > 0.01
    b0, _ = share(np.full(100_000, 5, dtype=np.uint64), "B", np.random.default_rng(4), 8)
    counts = np.bincount(b0.bits.astype(np.int64), minlength=256)
    assert stats.chisquare(counts).pvalue > 0.01


def test_local_gates():
    a0, a1 = sh(5)
    b0, b1 = sh(7, seed=1)
    assert reconstruct(a0 + b0, a1 + b1)[0] == 12
    c0, c1 = sh(M32 - 1)
    d0, d1 = sh(1, seed=2)
    assert reconstruct(c0 + d0, c1 + d1)[0] == 0
    assert reconstruct(a0.scale(3), a1.scale(3))[0] == 15
    assert reconstruct(a0.add_public(4), a1.add_public(4))[0] == 9
    x0, x1 = sh(0b1010, "B", 4)
    assert reconstruct(~x0, ~x1)[0] == 0b0101
    assert reconstruct(x0.xor_public(0b0011), x1.xor_public(0b0011))[0] == 0b1001


def test_pack_and_stack():
    x0, x1 = sh([1, 0, 1, 1], "B", 1)
    assert reconstruct(pack_lanes(x0), pack_lanes(x1)) == 0b1101
    s0 = stack([x0, x0], axis=1)
    assert s0.shape == (4, 2)
    assert concat([x0, x0]).shape == (8,)


# --- triples --------------------------------------------------------------------

def test_dealer_triples_verify():
    h0, h1 = dealer_generate(TripleCounts(10_000, 10_000), 11)
    a0, b0, c0 = h0.take_arith(10_000)
    a1, b1, c1 = h1.take_arith(10_000)
    assert np.array_equal((a0 + a1) * (b0 + b1), c0 + c1)
    a0, b0, c0 = h0.take_bit(10_000)
    a1, b1, c1 = h1.take_bit(10_000)
    assert np.array_equal((a0 ^ a1) & (b0 ^ b1), c0 ^ c1)


def test_single_arith_triple():
    h0, h1 = dealer_generate(TripleCounts(1, 0), 0)
    (a0, b0, c0), (a1, b1, c1) = h0.take_arith(1), h1.take_arith(1)
    assert (a0 + a1) * (b0 + b1) == c0 + c1


def test_empty_request_gives_empty_store():
    h0, _ = dealer_generate(TripleCounts(0, 0), 0)
    assert (h0.n_arith, h0.n_bit) == (0, 0)


def test_dealer_is_deterministic():
    x = dealer_generate(TripleCounts(5, 5), 9)[1].to_bytes()
    assert x == dealer_generate(TripleCounts(5, 5), 9)[1].to_bytes()
    assert x != dealer_generate(TripleCounts(5, 5), 10)[1].to_bytes()


def test_store_serialisation_round_trip():
    h0, _ = dealer_generate(TripleCounts(3, 4), 2)
    back = TripleStore.from_bytes(0, h0.to_bytes())
    assert [np.array_equal(x, y) for x, y in zip(back.take_bit(4), h0.take_bit(4))] == [True] * 3


def test_overdraw_raises():
    store = TripleStore.empty(0)
    with pytest.raises(SetupUnderprovisioned, match="setup-underprovisioned"):
        store.take_bit(1)


def test_engine_never_regenerates_triples():
    x0, _ = sh([1, 2], "B", 8)
    eng = Engine(0, None, dealer_generate(TripleCounts(0, 1), 0)[0])
    with pytest.raises(SetupUnderprovisioned):
        eng.and_(x0, x0)


# --- interactive gates ----------------------------------------------------------

def test_mul_and_and():
    a, b = sh(3), sh(4, seed=1)
    x, y = sh(1, "B", 1), sh(0, "B", 1, seed=1)
    out, _, _ = run_pair(lambda e, p: {"mul": e.mul(a[p], b[p]), "and": e.and_(x[p], y[p])})
    assert opened(out, "mul")[0] == 12
    assert opened(out, "and")[0] == 0


def test_mul_fuzz_and_one_round(rng):
    x = rng.integers(0, M32, 500, dtype=np.uint64)
    y = rng.integers(0, M32, 500, dtype=np.uint64)
    xs, ys = share(x, "A", rng), share(y, "A", rng)
    out, ledgers, stores = run_pair(lambda e, p: e.mul(xs[p], ys[p]))
    assert np.array_equal(opened(out), (x * y) % M32)
    st = ledgers[0].stats("gates")
    assert st.rounds == 1 and st.online_bytes == 2 * 500 * 4
    assert stores[0].remaining() == TripleCounts(0, 0)


@pytest.mark.parametrize("sel,expect", [(1, 9), (0, 2)])
def test_mux_examples(sel, expect):
    s = sh(sel, "B", 1)
    t, f = sh(9, "B", 8), sh(2, "B", 8, seed=1)
    ta, fa = sh(9), sh(2, seed=1)
    out, _, _ = run_pair(lambda e, p: {"b": e.mux(s[p], t[p], f[p]), "a": e.mux(s[p], ta[p], fa[p])})
    assert opened(out, "b")[0] == expect
    assert opened(out, "a")[0] == expect


def test_comparison_examples():
    five, five2 = sh(5, "B", 8), sh(5, "B", 8, seed=1)
    out, _, _ = run_pair(lambda e, p: {"gt": e.gt(five[p], five2[p]), "eq": e.eq(five[p], five2[p])})
    assert opened(out, "gt")[0] == 0
    assert opened(out, "eq")[0] == 1


def test_comparison_fuzz_all_widths(rng):
    for width in (1, 2, 3, 7, 16, 24, 32, 50):
        hi = 1 << width
        x = rng.integers(0, hi, 300, dtype=np.uint64)
        y = rng.integers(0, hi, 300, dtype=np.uint64)
        y[:40] = x[:40]
        xs, ys = share(x, "B", rng, width), share(y, "B", rng, width)
        out, _, _ = run_pair(lambda e, p: {"gt": e.gt(xs[p], ys[p]), "eq": e.eq(xs[p], ys[p]),
                                           "lt": e.lt(xs[p], ys[p])})
        assert np.array_equal(opened(out, "gt"), x > y), width
        assert np.array_equal(opened(out, "lt"), x < y), width
        assert np.array_equal(opened(out, "eq"), x == y), width


def test_comparator_depth_is_logarithmic():
    x = sh(list(range(10)), "B", 32)
    eng = Engine.counting()
    eng.gt(x[0], x[0])
    assert eng.rounds == 1 + 5
    eng = Engine.counting()
    eng.eq(x[0], x[0])
    assert eng.rounds == 5


def test_hamming_weight():
    full = (1 << 50) - 1
    v = sh([0, full], "B", 50)
    out, _, _ = run_pair(lambda e, p: e.hamming_weight(v[p]))
    assert list(opened(out)) == [0, 50]


def test_hamming_weight_fuzz(rng):
    for width in (1, 5, 8, 50, 64):
        x = rng.integers(0, 1 << width, 200, dtype=np.uint64, endpoint=False) if width < 64 else \
            rng.integers(0, np.iinfo(np.uint64).max, 200, dtype=np.uint64, endpoint=True)
        xs = share(x, "B", rng, width)
        out, _, _ = run_pair(lambda e, p: e.hamming_weight(xs[p]))
        assert np.array_equal(opened(out), [bin(int(v)).count("1") for v in x]), width


def test_or_tree_examples(rng):
    bits = np.array([[0, 0, 0, 0], [0, 1, 0, 0]], dtype=np.uint64)
    xs = share(bits, "B", rng, 1)
    out, _, _ = run_pair(lambda e, p: e.or_tree(xs[p], axis=1))
    assert list(opened(out)) == [0, 1]


def test_trees_fuzz(rng):
    bits = (rng.random((300, 50)) < 0.03).astype(np.uint64)
    bits[:5] = 1
    xs = share(bits, "B", rng, 1)
    out, _, _ = run_pair(lambda e, p: {"or": e.or_tree(xs[p], axis=1), "and": e.and_tree(xs[p], axis=1),
                                       "or0": e.or_tree(xs[p], axis=0)})
    assert np.array_equal(opened(out, "or"), bits.any(axis=1))
    assert np.array_equal(opened(out, "and"), bits.all(axis=1))
    assert np.array_equal(opened(out, "or0"), bits.any(axis=0))


def test_or_fold(rng):
    x = rng.integers(0, 1 << 20, 300, dtype=np.uint64)
    x[:30] = 0
    xs = share(x, "B", rng, 20)
    out, _, _ = run_pair(lambda e, p: e.or_fold(xs[p]))
    assert np.array_equal(opened(out), x != 0)


def test_boolean_adder(rng):
    x = rng.integers(0, M32, 300, dtype=np.uint64)
    y = rng.integers(0, M32, 300, dtype=np.uint64)
    xs, ys = share(x, "B", rng, 32), share(y, "B", rng, 32)
    out, _, _ = run_pair(lambda e, p: e.add_bool(xs[p], ys[p]))
    assert np.array_equal(opened(out), (x + y) % M32)


def test_conversion_examples():
    a = sh(123)
    z = sh(0)
    out, _, _ = run_pair(lambda e, p: {"rt": e.b2a(e.a2b(a[p])), "zero": e.a2b(z[p])})
    assert opened(out, "rt")[0] == 123
    assert opened(out, "zero")[0] == 0


def test_conversion_fuzz(rng):
    x = rng.integers(0, M32, 400, dtype=np.uint64)
    xs = share(x, "A", rng)
    small = x % 1000
    ss = share(small, "A", rng)
    xb = share(x, "B", rng, 32)
    out, _, _ = run_pair(lambda e, p: {"a2b": e.a2b(xs[p]), "b2a": e.b2a(xb[p]),
                                       "rt": e.b2a(e.a2b(xs[p])), "short": e.a2b(ss[p], bits=10)})
    for key in ("a2b", "b2a", "rt"):
        assert np.array_equal(opened(out, key), x), key
    assert np.array_equal(opened(out, "short"), small)


def test_select_broadcasts_selector(rng):
    sel = rng.integers(0, 2, 6, dtype=np.uint64)
    v = rng.integers(0, 256, (6, 3), dtype=np.uint64)
    ss, vs = share(sel, "B", rng, 1), share(v, "B", rng, 8)
    out, _, _ = run_pair(lambda e, p: e.select_many([(ss[p], vs[p])])[0])
    assert np.array_equal(opened(out), v * sel[:, None])


def test_linear_gates_move_no_bytes(rng):
    xs, ys = share([1, 2, 3], "A", rng), share([4, 5, 6], "A", rng)
    bs = share([1, 2, 3], "B", rng, 8)

    def linear(e, p):
        r = (xs[p] + ys[p]) - xs[p].scale(2)
        b = (bs[p] ^ bs[p]).xor_public(3) << 1
        return r.add_public(1), ~b

    _, ledgers, _ = run_pair(linear)
    st = ledgers[0].stats("gates")
    assert (st.online_bytes, st.rounds) == (0, 0)


def test_batched_calls_are_single_rounds(rng):
    xs = share(rng.integers(0, 255, 20, dtype=np.uint64), "B", rng, 8)

    def batch(e, p):
        e.and_many([(xs[p], xs[p]), (xs[p], ~xs[p]), (xs[p], xs[p])])

    _, ledgers, _ = run_pair(batch)
    assert ledgers[0].stats("gates").rounds == 1
    assert ledgers[1].stats("gates").rounds == 1


def test_demand_matches_consumption(rng):
    xs = share(rng.integers(0, M32, 10, dtype=np.uint64), "A", rng)

    def work(e, p):
        return e.gt(e.a2b(xs[p]), e.a2b(xs[p], bits=16))

    counts = demand(work, 0)
    assert counts.arith == 0 and counts.bit > 0
    _, _, stores = run_pair(work)
    assert stores[0].remaining() == TripleCounts(0, 0)


def test_share_shapes_are_checked():
    a = ArithShareVec(0, [1, 2])
    with pytest.raises(ValueError):
        a + ArithShareVec(0, [1, 2, 3])
    with pytest.raises(ValueError):
        BoolShareVec(0, [1], 65)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 255), st.integers(0, 255)), min_size=1, max_size=20))
def test_comparators_property(values):
    rng = np.random.default_rng(len(values))
    x = np.array([a for a, _ in values], dtype=np.uint64)
    y = np.array([b for _, b in values], dtype=np.uint64)
    xs, ys = share(x, "B", rng, 8), share(y, "B", rng, 8)
    out, _, _ = run_pair(lambda e, p: {"gt": e.gt(xs[p], ys[p]), "eq": e.eq(xs[p], ys[p]),
                                       "sum": e.add_bool(xs[p], ys[p])})
    assert np.array_equal(opened(out, "gt"), x > y)
    assert np.array_equal(opened(out, "eq"), x == y)
    assert np.array_equal(opened(out, "sum"), (x + y) % 256)
