"""Per-pair input table and its XOR sharing.

Every field of a :class:`PairRecord` is Boolean-shared; a cohort becomes an
``(n, 12)`` ``uint64`` table whose column ``k`` holds ``FIELDS[k]``.
"""

from __future__ import annotations

import io
from typing import Sequence

import numpy as np

from ..domain import HLA_COUNT, WEIGHT_BITS, PairRecord
from ..mpc.shares import BoolShareVec, share

FIELDS = (
    "donor_hla", "recipient_ahla", "donor_typing", "recipient_typing",
    "donor_bg", "recipient_bg", "donor_age", "recipient_age",
    "donor_sex", "recipient_sex", "donor_weight", "recipient_weight",
)
COLUMN = {name: k for k, name in enumerate(FIELDS)}


def field_widths(hla_count: int = HLA_COUNT) -> tuple[int, ...]:
    return (hla_count,) * 4 + (2, 2, 1, 1, 1, 1, WEIGHT_BITS, WEIGHT_BITS)


def encode_table(pairs: Sequence[PairRecord]) -> np.ndarray:
    rows = [
        (p.donor_hla.as_int(), p.recipient_ahla.as_int(),
         p.donor_hla_typing.as_int(), p.recipient_hla_typing.as_int(),
         p.donor_bg, p.recipient_bg, p.donor_age, p.recipient_age,
         p.donor_sex, p.recipient_sex, p.donor_weight, p.recipient_weight)
        for p in pairs
    ]
    return np.array(rows, dtype=np.uint64).reshape(len(rows), len(FIELDS))


def share_table(table: np.ndarray, rng: np.random.Generator,
                hla_count: int = HLA_COUNT) -> tuple[np.ndarray, np.ndarray]:
    """Split a plaintext table column by column. Returns (P0 table, P1 table)."""
    t0 = np.empty_like(table)
    t1 = np.empty_like(table)
    for k, w in enumerate(field_widths(hla_count)):
        s0, s1 = share(table[:, k], "B", rng, w)
        t0[:, k], t1[:, k] = s0.bits, s1.bits
    return t0, t1


def table_to_bytes(table: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(table, dtype=np.uint64), allow_pickle=False)
    return buf.getvalue()


def table_from_bytes(data: bytes) -> np.ndarray:
    arr = np.load(io.BytesIO(data), allow_pickle=False)
    if arr.dtype != np.uint64 or arr.ndim != 2 or arr.shape[1] != len(FIELDS):
        raise ValueError(f"malformed input table {arr.dtype} {arr.shape}")
    return arr


class SharedCohort:
    """One server's share of the input table."""

    def __init__(self, party_id: int, table: np.ndarray, hla_count: int = HLA_COUNT):
        self.party_id = party_id
        self.table = np.asarray(table, dtype=np.uint64)
        self.hla_count = hla_count
        self.widths = field_widths(hla_count)

    @property
    def n(self) -> int:
        return self.table.shape[0]

    def field(self, name: str) -> BoolShareVec:
        k = COLUMN[name]
        return BoolShareVec(self.party_id, self.table[:, k], self.widths[k])
