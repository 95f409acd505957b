"""Plaintext medical records, their bit encodings and the public parameters.

Everything here is shared by the cleartext reference pipeline and the
two-party pipeline: both consume the same ``PairRecord`` objects and the same
``CriteriaWeights``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import jsonschema

# Split antigens, column by column: HLA-A, HLA-B, HLA-DR, HLA-DQ.
HLA_CATALOG: tuple[str, ...] = (
    "A23", "A24", "A25", "A26", "A29", "A31", "A32", "A33", "A34", "A66",
    "A68", "A69", "A74",
    "B38", "B39", "B44", "B45", "B49", "B50", "B51", "B52", "B54", "B55",
    "B56", "B57", "B58",
    "B60", "B61", "B62", "B63", "B64", "B65", "B71", "B72", "B75", "B76",
    "B77",
    "DR11", "DR12", "DR13", "DR14", "DR15", "DR16", "DR17", "DR18",
    "DQ5", "DQ6", "DQ7", "DQ8", "DQ9",
)
HLA_COUNT = len(HLA_CATALOG)

BLOOD_GROUPS = ("O", "A", "B", "AB")
_BG_CODE = {label: code for code, label in enumerate(BLOOD_GROUPS)}

SENIOR_AGE = 55
MAX_AGE = 130
SEX_CODES = {"M": 0, "F": 1}
WEIGHT_BITS = 16
RING_BITS = 32
EDGE_WEIGHT_BOUND = 1 << 24


class ValidationError(ValueError):
    pass


def encode_blood_group(label: str) -> int:
    """Two-bit code, O=00, A=01, B=10, AB=11."""
    try:
        return _BG_CODE[label]
    except KeyError:
        raise ValidationError(f"unknown blood group {label!r}") from None


def decode_blood_group(code: int) -> str:
    if code not in range(4):
        raise ValidationError(f"blood group code out of range: {code}")
    return BLOOD_GROUPS[code]


def encode_age_group(age_years: int) -> int:
    """0 for junior donors/recipients (< 55), 1 for seniors (>= 55)."""
    if isinstance(age_years, bool) or not isinstance(age_years, int):
        raise ValidationError(f"age must be an integer, got {age_years!r}")
    if not 0 <= age_years <= MAX_AGE:
        raise ValidationError(f"age out of range: {age_years}")
    return int(age_years >= SENIOR_AGE)


def decode_age_group(code: int) -> str:
    return ("junior", "senior")[code]


def encode_sex(label: str) -> int:
    try:
        return SEX_CODES[label]
    except KeyError:
        raise ValidationError(f"unknown sex label {label!r}") from None


def decode_sex(code: int) -> str:
    return "F" if code else "M"


@dataclass(frozen=True)
class HlaVector:
    bits: tuple[bool, ...]

    @classmethod
    def from_bits(cls, bits: Iterable) -> "HlaVector":
        return cls(tuple(bool(b) for b in bits))

    @classmethod
    def from_antigens(cls, names: Iterable[str]) -> "HlaVector":
        wanted = set(names)
        unknown = wanted - set(HLA_CATALOG)
        if unknown:
            raise ValidationError(f"antigens not in catalog: {sorted(unknown)}")
        return cls(tuple(name in wanted for name in HLA_CATALOG))

    @classmethod
    def zeros(cls, n: int = HLA_COUNT) -> "HlaVector":
        return cls((False,) * n)

    def __len__(self) -> int:
        return len(self.bits)

    def as_int(self) -> int:
        """Pack into an integer, catalog position i at bit i."""
        out = 0
        for i, b in enumerate(self.bits):
            if b:
                out |= 1 << i
        return out


@dataclass(frozen=True)
class PairRecord:
    donor_hla: HlaVector
    recipient_ahla: HlaVector
    donor_hla_typing: HlaVector
    recipient_hla_typing: HlaVector
    donor_bg: int
    recipient_bg: int
    donor_age: int
    recipient_age: int
    donor_sex: int
    recipient_sex: int
    donor_weight: int
    recipient_weight: int


@dataclass(frozen=True)
class ClassWeights:
    A: int = 3
    B: int = 2
    C: int = 1


@dataclass(frozen=True)
class CriteriaWeights:
    """Per-criterion multipliers ordered (HLA, ABO, age, sex, weight)."""

    w: tuple[int, int, int, int, int] = (4, 3, 1, 1, 1)
    class_weights: ClassWeights = field(default_factory=ClassWeights)

    def __post_init__(self):
        if len(self.w) != 5:
            raise ValidationError("need exactly five criterion weights")
        if any(x < 0 for x in self.w):
            raise ValidationError("criterion weights must be non-negative")
        cw = self.class_weights
        if not cw.A > cw.B > cw.C > 0:
            raise ValidationError("class weights must satisfy A > B > C > 0")
        if self.max_edge_weight() >= EDGE_WEIGHT_BOUND:
            raise ValidationError("1 + sum(w) * A must stay below 2^24")

    def max_edge_weight(self) -> int:
        return 1 + sum(self.w) * self.class_weights.A

    def to_json(self) -> dict:
        cw = self.class_weights
        return {"w": list(self.w), "class_weights": {"A": cw.A, "B": cw.B, "C": cw.C}}

    @classmethod
    def from_json(cls, obj: dict) -> "CriteriaWeights":
        cw = obj.get("class_weights", {})
        return cls(
            w=tuple(int(x) for x in obj["w"]),
            class_weights=ClassWeights(**{k: int(v) for k, v in cw.items()}),
        )


@dataclass(frozen=True)
class PublicParams:
    n_pairs: int
    cycle_len: int
    hla_count: int = HLA_COUNT
    ring_bits: int = RING_BITS

    def __post_init__(self):
        if self.cycle_len < 2:
            raise ValidationError("cycle_len must be at least 2")
        if self.ring_bits != RING_BITS:
            raise ValidationError("only a 32-bit ring is supported")
        if not 1 <= self.hla_count <= 64:
            raise ValidationError("hla_count must be in 1..64")

    def to_json(self) -> dict:
        return {
            "n_pairs": self.n_pairs,
            "cycle_len": self.cycle_len,
            "hla_count": self.hla_count,
            "ring_bits": self.ring_bits,
        }


def validate_pair(p: PairRecord, params: PublicParams) -> list[str]:
    """Return every invariant violation of ``p``; an empty list means valid."""
    out = []
    for name in ("donor_hla", "recipient_ahla", "donor_hla_typing", "recipient_hla_typing"):
        if len(getattr(p, name)) != params.hla_count:
            out.append(f"hla length: {name}")
    for name in ("donor_bg", "recipient_bg"):
        if getattr(p, name) not in (0, 1, 2, 3):
            out.append(f"blood group: {name}")
    for name in ("donor_age", "recipient_age"):
        if getattr(p, name) not in (0, 1):
            out.append(f"age group: {name}")
    for name in ("donor_sex", "recipient_sex"):
        if getattr(p, name) not in (0, 1):
            out.append(f"sex: {name}")
    for name in ("donor_weight", "recipient_weight"):
        value = getattr(p, name)
        if not isinstance(value, int) or value < 0 or value >= 1 << WEIGHT_BITS:
            out.append(f"weight bound: {name}")
    return out


# --- JSON ingestion -------------------------------------------------------

def cohort_schema() -> dict:
    text = resources.files("kepmpc").joinpath("schemas/cohort.schema.json").read_text()
    return json.loads(text)


def pair_from_json(obj: dict) -> PairRecord:
    d, r = obj["donor"], obj["recipient"]
    d_hla = HlaVector.from_bits(d["hla"])
    return PairRecord(
        donor_hla=d_hla,
        recipient_ahla=HlaVector.from_bits(r["ahla"]),
        donor_hla_typing=HlaVector.from_bits(d["hla_typing"]) if "hla_typing" in d else d_hla,
        recipient_hla_typing=HlaVector.from_bits(r["hla"]),
        donor_bg=encode_blood_group(d["bg"]),
        recipient_bg=encode_blood_group(r["bg"]),
        donor_age=encode_age_group(d["age"]),
        recipient_age=encode_age_group(r["age"]),
        donor_sex=encode_sex(d["sex"]),
        recipient_sex=encode_sex(r["sex"]),
        donor_weight=int(d["weight_kg"]),
        recipient_weight=int(r["weight_kg"]),
    )


def load_cohort(source: str | Path | list, params_hla: int = HLA_COUNT) -> list[PairRecord]:
    """Read a cohort JSON file (or an already parsed list) into validated pairs."""
    if isinstance(source, (str, Path)):
        data = json.loads(Path(source).read_text())
    else:
        data = source
    jsonschema.validate(data, cohort_schema())
    pairs = [pair_from_json(obj) for obj in data]
    check = PublicParams(n_pairs=len(pairs), cycle_len=2, hla_count=params_hla)
    for idx, p in enumerate(pairs):
        problems = validate_pair(p, check)
        if problems:
            raise ValidationError(f"pair {idx}: {', '.join(problems)}")
    return pairs


def pair_to_json(p: PairRecord, ages: tuple[int, int] | None = None) -> dict:
    """Inverse of ``pair_from_json``. Age groups become representative ages
    (40 / 60) unless the original ages are passed in."""
    d_age, r_age = ages if ages else (60 if p.donor_age else 40, 60 if p.recipient_age else 40)
    donor = {
        "hla": list(p.donor_hla.bits),
        "bg": decode_blood_group(p.donor_bg),
        "age": d_age,
        "sex": decode_sex(p.donor_sex),
        "weight_kg": p.donor_weight,
    }
    if p.donor_hla_typing != p.donor_hla:
        donor["hla_typing"] = list(p.donor_hla_typing.bits)
    recipient = {
        "ahla": list(p.recipient_ahla.bits),
        "hla": list(p.recipient_hla_typing.bits),
        "bg": decode_blood_group(p.recipient_bg),
        "age": r_age,
        "sex": decode_sex(p.recipient_sex),
        "weight_kg": p.recipient_weight,
    }
    return {"donor": donor, "recipient": recipient}


def dump_cohort(pairs: Sequence[PairRecord], path: str | Path | None = None) -> str:
    text = json.dumps([pair_to_json(p) for p in pairs], indent=1)
    if path is not None:
        Path(path).write_text(text)
    return text
