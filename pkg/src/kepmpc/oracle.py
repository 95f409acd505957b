"""Cleartext reference pipeline and brute-force graph checks.

Mirrors the secure pipeline stage by stage, including tie-breaking, on
plain integers. Everything here is deliberately straightforward: loops over
Python ints rather than vectorised tricks, so it shares no code path with the
secure implementation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domain import BLOOD_GROUPS, CriteriaWeights, PairRecord

# who can receive from whom, by blood group label
CAN_DONATE_TO = {
    "O": {"O", "A", "B", "AB"},
    "A": {"A", "AB"},
    "B": {"B", "AB"},
    "AB": {"AB"},
}


def score_hla(typing_d: Sequence[bool], typing_r: Sequence[bool], cw: CriteriaWeights) -> int:
    mismatches = sum(1 for a, b in zip(typing_d, typing_r) if a != b)
    c = cw.class_weights
    if mismatches == 0:
        return c.A
    if mismatches <= 2:
        return c.B
    if mismatches <= 4:
        return c.C
    return 0


def score_abo(bg_d: int, bg_r: int, cw: CriteriaWeights) -> int:
    ok = BLOOD_GROUPS[bg_r] in CAN_DONATE_TO[BLOOD_GROUPS[bg_d]]
    return cw.class_weights.A if ok else 0


def score_age(age_d: int, age_r: int, cw: CriteriaWeights) -> int:
    if age_d == age_r:
        return cw.class_weights.A
    if age_d == 0 and age_r == 1:      # junior donor, senior recipient
        return cw.class_weights.B
    return 0


def score_sex(sex_d: int, sex_r: int, cw: CriteriaWeights) -> int:
    if sex_d == sex_r:
        return cw.class_weights.A
    if sex_d == 0 and sex_r == 1:      # male donor, female recipient
        return cw.class_weights.B
    return 0


def score_weight(w_d: int, w_r: int, cw: CriteriaWeights) -> int:
    return 0 if w_d < w_r else cw.class_weights.A


def crossmatch_ok(hla_d: Sequence[bool], ahla_r: Sequence[bool]) -> bool:
    return not any(a and b for a, b in zip(hla_d, ahla_r))


def edge_weight(d: PairRecord, r: PairRecord, cw: CriteriaWeights) -> int:
    if not crossmatch_ok(d.donor_hla.bits, r.recipient_ahla.bits):
        return 0
    scores = (
        score_hla(d.donor_hla_typing.bits, r.recipient_hla_typing.bits, cw),
        score_abo(d.donor_bg, r.recipient_bg, cw),
        score_age(d.donor_age, r.recipient_age, cw),
        score_sex(d.donor_sex, r.recipient_sex, cw),
        score_weight(d.donor_weight, r.recipient_weight, cw),
    )
    return 1 + sum(w * s for w, s in zip(cw.w, scores))


def compatibility_matrix(pairs: Sequence[PairRecord], cw: CriteriaWeights) -> list[list[int]]:
    n = len(pairs)
    return [[0 if i == j else edge_weight(pairs[i], pairs[j], cw) for j in range(n)]
            for i in range(n)]


# --- graph identities ------------------------------------------------------------

def total_cycles(n: int, L: int) -> int:
    out = 1
    for i in range(L):
        out *= max(n - i, 0)
    return out


def trace_power(adj, L: int) -> int:
    """trace(U^L) with exact integer arithmetic."""
    u = np.array([[1 if x else 0 for x in row] for row in adj], dtype=object)
    p = u.copy()
    for _ in range(L - 1):
        p = p.dot(u)
    return int(sum(p[i, i] for i in range(len(u))))


def brute_force_cycle_count(adj, L: int) -> int:
    """Closed ordered L-tuples of distinct vertices."""
    n = len(adj)
    return sum(
        1 for t in itertools.permutations(range(n), L)
        if all(adj[t[k]][t[(k + 1) % L]] for k in range(L))
    )


def canonical_cycles(adj, L: int) -> dict[tuple[int, ...], int]:
    """One representative per rotation class (its minimal rotation) -> weight."""
    n = len(adj)
    out = {}
    for t in itertools.permutations(range(n), L):
        if not all(adj[t[k]][t[(k + 1) % L]] for k in range(L)):
            continue
        canon = min(tuple(t[(s + k) % L] for k in range(L)) for s in range(L))
        out[canon] = sum(int(adj[t[k]][t[(k + 1) % L]]) for k in range(L))
    return out


# --- the pipeline ----------------------------------------------------------------

def knn(cands: list[tuple[int, tuple]], k: int, dummy: tuple) -> list[tuple[int, tuple]]:
    """Insertion into k slots, bubbling up past strictly lighter entries."""
    slots = [(0, dummy)] * k + [None]
    for cand in cands:
        slots[k] = cand
        j = k
        while j > 0 and slots[j][0] > slots[j - 1][0]:
            slots[j], slots[j - 1] = slots[j - 1], slots[j]
            j -= 1
    return slots[:k]


def is_rotation_of(c1: tuple, c2: tuple) -> bool:
    L = len(c1)
    return any(all(c1[l] == c2[(l + s) % L] for l in range(L)) for s in range(1, L))


def remove_duplicates(ranked: list[tuple[int, tuple]], n_unique: int, dummy: tuple):
    marked = []
    for i, (w, c) in enumerate(ranked):
        dup = any(is_rotation_of(c, ranked[j][1]) for j in range(i))
        marked.append((0 if dup else w, c))
    return knn(marked, n_unique, dummy)


def greedy_sets(unique: list[tuple[int, tuple]], dummy: tuple):
    """Per anchor: the set built by scanning all other cycles in order."""
    sets, weights = [], []
    for i, (wi, ci) in enumerate(unique):
        members = [ci]
        weight = wi
        for j, (wj, cj) in enumerate(unique):
            if j == i:
                members.append(dummy)
                continue
            used = {v for c in members for v in c}
            if used.isdisjoint(cj):
                members.append(cj)
                weight += wj
            else:
                members.append(dummy)
        sets.append(members)
        weights.append(weight)
    return sets, weights


def find_maximum_set(sets, weights):
    best_w, best = 0, None
    for s, w in zip(sets, weights):
        if w > best_w:
            best_w, best = w, s
    return best_w, best


@dataclass
class OracleResult:
    edges: list[list[int]]
    revealed_cycle_count: int
    closed_walks: int
    candidates: list[tuple[int, tuple]] = field(default_factory=list)
    ranked: list[tuple[int, tuple]] = field(default_factory=list)
    unique: list[tuple[int, tuple]] = field(default_factory=list)
    set_weights: list[int] = field(default_factory=list)
    cycles: list[list[int]] = field(default_factory=list)
    total_weight: int = 0

    def to_json(self) -> dict:
        return {
            "cycles": self.cycles,
            "total_weight": self.total_weight,
            "revealed_cycle_count": self.revealed_cycle_count,
            "closed_walks": self.closed_walks,
            "edges": self.edges,
            "unique": [[w, list(c)] for w, c in self.unique],
            "set_weights": self.set_weights,
        }

    def outcome(self) -> dict:
        return {"cycles": self.cycles, "total_weight": self.total_weight,
                "revealed_cycle_count": self.revealed_cycle_count}


def oracle_pipeline(pairs: Sequence[PairRecord], cw: CriteriaWeights, cycle_len: int,
                    reveal_guard: bool = False) -> OracleResult:
    L = cycle_len
    edges = compatibility_matrix(pairs, cw)
    n = len(edges)
    walks = trace_power(edges, L)
    revealed = walks if (not reveal_guard or walks > L) else 0
    res = OracleResult(edges, revealed, walks)
    dummy = (n,) * L

    for t in itertools.permutations(range(n), L):
        w = valid = 0
        for k in range(L):
            e = edges[t[k]][t[(k + 1) % L]]
            w += e
            valid += 1 if e > 0 else 0
        res.candidates.append((w if valid == L else 0, t))
    if revealed == 0:
        return res

    res.ranked = knn(res.candidates, revealed, dummy)
    res.unique = remove_duplicates(res.ranked, revealed // L, dummy)
    if not res.unique:
        return res
    sets, res.set_weights = greedy_sets(res.unique, dummy)
    best_w, best = find_maximum_set(sets, res.set_weights)
    if best is not None:
        res.total_weight = best_w
        res.cycles = [list(c) for c in best if c != dummy]
    return res


# --- documentation aid ----------------------------------------------------------

def optimal_packing_weight(edges, L: int) -> int:
    """Exact best total weight of vertex-disjoint L-cycles (exponential)."""
    cycles = list(canonical_cycles(edges, L).items())
    best = 0

    def go(idx, used, acc):
        nonlocal best
        best = max(best, acc)
        for k in range(idx, len(cycles)):
            c, w = cycles[k]
            if used.isdisjoint(c):
                go(k + 1, used | set(c), acc + w)

    go(0, frozenset(), 0)
    return best


def optimality_gap(pairs: Sequence[PairRecord], cw: CriteriaWeights, cycle_len: int) -> dict:
    if len(pairs) > 8:
        raise ValueError("exhaustive packing is limited to 8 pairs")
    res = oracle_pipeline(pairs, cw, cycle_len)
    opt = optimal_packing_weight(res.edges, cycle_len)
    return {"greedy": res.total_weight, "optimal": opt,
            "ratio": (res.total_weight / opt) if opt else 1.0}


__all__ = [
    "CAN_DONATE_TO", "OracleResult", "brute_force_cycle_count", "canonical_cycles",
    "compatibility_matrix", "edge_weight", "knn", "optimality_gap",
    "oracle_pipeline", "total_cycles", "trace_power",
]
