from .engine import Engine, demand
from .ledger import PhaseLedger
from .shares import ArithShareVec, BoolShareVec, reconstruct, share
from .triples import SetupUnderprovisioned, TripleCounts, TripleStore, dealer_generate

__all__ = [
    "ArithShareVec", "BoolShareVec", "Engine", "PhaseLedger", "SetupUnderprovisioned",
    "TripleCounts", "TripleStore", "dealer_generate", "demand", "reconstruct", "share",
]
