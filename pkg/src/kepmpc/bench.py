"""Benchmark sweeps: per-phase setup/online cost per cohort size."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .domain import CriteriaWeights, PublicParams
from .generate import Prevalence, gen_cohort
from .protocols.pipeline import PHASES, PipelineConfig, run_local

# Sharing domain each phase would favour in a mixed-protocol framework with a
# garbled-circuit backend. Here every Boolean phase runs in GMW sharing; the
# labels only annotate benchmark output.
REFERENCE_DOMAIN = {
    "compatibility_graph": "boolean",
    "cycle_count": "arithmetic",
    "cycle_evaluation": "garbled",
    "solution_evaluation": "garbled",
}

SHAPING_NOTE = (
    "runs use local sockets; emulate a WAN with e.g. "
    "`tc qdisc add dev lo root netem delay 50ms rate 100mbit` and remove it with "
    "`tc qdisc del dev lo root`"
)


@dataclass(frozen=True)
class BenchPlan:
    pairs: tuple[int, ...]
    cycle_lengths: tuple[int, ...] = (2,)
    repetitions: int = 1
    seed: int = 0
    prevalence: Prevalence = field(default_factory=Prevalence)
    weights: CriteriaWeights = field(default_factory=CriteriaWeights)
    network_note: str = SHAPING_NOTE

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if not self.pairs or min(self.pairs) < 2:
            raise ValueError("every swept cohort needs at least two pairs")
        if not self.cycle_lengths or min(self.cycle_lengths) < 2:
            raise ValueError("cycle lengths must be at least 2")

    @classmethod
    def from_json(cls, obj: dict) -> "BenchPlan":
        return cls(
            pairs=tuple(int(n) for n in obj["pairs"]),
            cycle_lengths=tuple(int(L) for L in obj.get("cycle_lengths", [2])),
            repetitions=int(obj.get("repetitions", 1)),
            seed=int(obj.get("seed", 0)),
            prevalence=Prevalence(**obj.get("prevalence", {})),
            weights=CriteriaWeights.from_json(obj["weights"]) if "weights" in obj else CriteriaWeights(),
            network_note=obj.get("network_note", SHAPING_NOTE),
        )

    @classmethod
    def load(cls, path: str | Path) -> "BenchPlan":
        return cls.from_json(json.loads(Path(path).read_text()))


def columns() -> list[str]:
    cols = ["pairs", "cycle_len", "repetitions", "revealed_cycle_count",
            "setup_bytes", "online_bytes", "rounds", "setup_s", "online_s", "total_s"]
    for p in PHASES:
        cols += [f"{p}_setup_bytes", f"{p}_online_bytes", f"{p}_setup_s", f"{p}_online_s"]
    return cols


def measure(n: int, L: int, plan: BenchPlan, rep: int) -> dict:
    """One end-to-end run; counters come from server 0's ledger."""
    seed = plan.seed + 1000 * rep + n
    pairs = gen_cohort(n, seed, plan.prevalence)
    cfg = PipelineConfig(PublicParams(n, L), plan.weights)
    start = time.perf_counter()
    run = run_local(pairs, cfg, seed)
    wall = time.perf_counter() - start
    ledger = run.results[0]["ledger"]
    row = {"pairs": n, "cycle_len": L, "revealed_cycle_count": run.results[0]["revealed_cycle_count"],
           "total_s": wall}
    for key in ("setup_bytes", "online_bytes", "rounds"):
        row[key] = sum(ledger[p][key] for p in PHASES)
    row["setup_s"] = sum(ledger[p]["setup_seconds"] for p in PHASES)
    row["online_s"] = sum(ledger[p]["online_seconds"] for p in PHASES)
    for p in PHASES:
        row[f"{p}_setup_bytes"] = ledger[p]["setup_bytes"]
        row[f"{p}_online_bytes"] = ledger[p]["online_bytes"]
        row[f"{p}_setup_s"] = ledger[p]["setup_seconds"]
        row[f"{p}_online_s"] = ledger[p]["online_seconds"]
    return row


def bench(plan: BenchPlan, progress: Callable[[dict], None] | None = None) -> list[dict]:
    """Average every cell of the sweep over the plan's repetitions."""
    rows = []
    for L in plan.cycle_lengths:
        for n in plan.pairs:
            runs = [measure(n, L, plan, rep) for rep in range(plan.repetitions)]
            row = {"pairs": n, "cycle_len": L, "repetitions": plan.repetitions}
            for key in columns()[3:]:
                row[key] = float(np.mean([r[key] for r in runs]))
            rows.append(row)
            if progress:
                progress(row)
    return rows


def write_csv(rows: Sequence[dict], path: str | Path):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns())
        writer.writeheader()
        for row in rows:
            writer.writerow({k: round(v, 6) if isinstance(v, float) else v for k, v in row.items()})


def power_law_exponent(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Slope of the least-squares line through (log x, log y)."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    keep = (xs > 0) & (ys > 0)
    if keep.sum() < 2:
        raise ValueError("a power-law fit needs two positive points")
    slope, _ = np.polyfit(np.log(xs[keep]), np.log(ys[keep]), 1)
    return float(slope)


def fit_report(rows: Sequence[dict], plan: BenchPlan | None = None) -> dict:
    """Power-law exponents of runtime against cohort size, per cycle length."""
    out = {"reference_domain": REFERENCE_DOMAIN, "exponents": {}}
    if plan is not None:
        out["plan"] = {**asdict(plan), "weights": plan.weights.to_json()}
    for L in sorted({r["cycle_len"] for r in rows}):
        sub = [r for r in rows if r["cycle_len"] == L]
        if len(sub) < 2:
            continue
        ns = [r["pairs"] for r in sub]
        fits = {"total": power_law_exponent(ns, [r["total_s"] for r in sub])}
        for p in PHASES:
            try:
                fits[p] = power_law_exponent(ns, [r[f"{p}_setup_s"] + r[f"{p}_online_s"] for r in sub])
            except ValueError:
                fits[p] = None
        out["exponents"][str(L)] = fits
    return out
