"""Synthetic cohorts with tunable compatibility density."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import HLA_COUNT, HlaVector, PairRecord, encode_age_group

# rough population shares of O, A, B, AB
BLOOD_GROUP_SHARES = (0.45, 0.40, 0.11, 0.04)


@dataclass(frozen=True)
class Prevalence:
    """``antigen``: chance a donor carries each catalog antigen.
    ``antibody``: chance a recipient has each antibody; 0 disables crossmatch
    rejections. ``typing``: chance of each antigen in the typing vectors."""

    antigen: float = 0.08
    antibody: float = 0.15
    typing: float = 0.04


def gen_cohort(n: int, seed: int, prevalence: Prevalence = Prevalence(),
               hla_count: int = HLA_COUNT) -> list[PairRecord]:
    if n < 2:
        raise ValueError("a cohort needs at least two pairs")
    rng = np.random.default_rng(seed)

    def vec(p):
        return HlaVector.from_bits(rng.random(hla_count) < p)

    pairs = []
    for _ in range(n):
        bg_d, bg_r = rng.choice(4, size=2, p=BLOOD_GROUP_SHARES)
        age_d, age_r = rng.integers(18, 80, size=2)
        sex_d, sex_r = rng.integers(0, 2, size=2)
        w_d, w_r = rng.integers(45, 121, size=2)
        pairs.append(PairRecord(
            donor_hla=vec(prevalence.antigen),
            recipient_ahla=vec(prevalence.antibody),
            donor_hla_typing=vec(prevalence.typing),
            recipient_hla_typing=vec(prevalence.typing),
            donor_bg=int(bg_d), recipient_bg=int(bg_r),
            donor_age=encode_age_group(int(age_d)), recipient_age=encode_age_group(int(age_r)),
            donor_sex=int(sex_d), recipient_sex=int(sex_r),
            donor_weight=int(w_d), recipient_weight=int(w_r),
        ))
    return pairs
