"""The four-phase pipeline as run by one computing server.

Before each phase goes online the server dry-runs it against a counting
engine to learn its exact triple demand, asks the dealer for that many, and
only then exchanges online rounds with its peer. Control flow depends only on
public values, so both servers ask for the same amounts.
"""

from __future__ import annotations

import socket
import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..domain import CriteriaWeights, PairRecord, PublicParams
from ..mpc.engine import Engine, demand
from ..mpc.ledger import PhaseLedger
from ..mpc.shares import concat
from ..net.channel import Connection, Transcript, TransportError
from ..net.session import DealerClient, NoDealer, handshake, serve_dealer
from .cycles import CycleCandidates, determine_number_cycles, evaluate_cycles, remove_weights, vertex_width
from .inputs import SharedCohort, encode_table, share_table
from .matching import compute_compatibility_graph
from .solution import eval_solution

PHASES = ("compatibility_graph", "cycle_count", "cycle_evaluation", "solution_evaluation")


@dataclass(frozen=True)
class PipelineConfig:
    params: PublicParams
    weights: CriteriaWeights = field(default_factory=CriteriaWeights)
    reveal_guard: bool = False

    def to_json(self) -> dict:
        return {**self.params.to_json(), "weights": self.weights.to_json(),
                "reveal_guard": self.reveal_guard}

    @property
    def edge_bits(self) -> int:
        return self.weights.max_edge_weight().bit_length()

    @property
    def cycle_bits(self) -> int:
        return (self.params.cycle_len * self.weights.max_edge_weight()).bit_length()

    @property
    def set_bits(self) -> int:
        n = max(self.params.n_pairs, 1)
        return min(32, max(self.cycle_bits, (n * self.weights.max_edge_weight()).bit_length()))


# --- phase bodies; each takes the engine first and touches nothing else ----------

def phase_graph(eng: Engine, cohort: SharedCohort, cfg: PipelineConfig):
    return compute_compatibility_graph(eng, cohort, cfg.weights).entries


def phase_count(eng: Engine, entries, cfg: PipelineConfig):
    unweighted = remove_weights(eng, entries, cfg.edge_bits)
    n_cycles = determine_number_cycles(eng, unweighted, cfg.params.cycle_len, cfg.reveal_guard)
    return unweighted, n_cycles


def phase_cycles(eng: Engine, entries, unweighted, cfg: PipelineConfig, n_cycles: int):
    L = cfg.params.cycle_len
    if n_cycles == 0:
        vw = vertex_width(cfg.params.n_pairs)
        return CycleCandidates(eng.bool_const(0, cfg.cycle_bits, (0,)),
                               eng.bool_const(0, vw, (0, L)))
    return evaluate_cycles(eng, entries, unweighted, L, n_cycles, cfg.cycle_bits)


def phase_solution(eng: Engine, unique: CycleCandidates, cfg: PipelineConfig):
    sol = eval_solution(eng, unique, cfg.params.n_pairs, cfg.set_bits)
    opened = eng.reveal(concat([sol.total_weight, sol.slots.reshape(-1)]))
    return int(opened[0]), opened[1:].reshape(-1, cfg.params.cycle_len)


def decode_cycles(slots: np.ndarray, n_pairs: int) -> list[list[int]]:
    return [[int(v) for v in row] for row in slots if not np.all(row == n_pairs)]


# --- one server ------------------------------------------------------------------

class PartyRun:
    def __init__(self, party_id: int, peer: Connection, dealer, ledger: PhaseLedger):
        self.party_id = party_id
        self.peer = peer
        self.dealer = dealer
        self.ledger = ledger

    def phase(self, name: str, fn, *args):
        self.ledger.begin_setup(name)
        counts = demand(fn, *args, party_id=self.party_id)
        store = self.dealer.request(name, counts, self.party_id)
        self.ledger.begin_online(name)
        out = fn(Engine(self.party_id, self.peer, store), *args)
        self.ledger.finish()
        return out


def run_pipeline(party_id: int, cohort: SharedCohort, cfg: PipelineConfig,
                 peer: Connection, dealer=None, ledger: PhaseLedger | None = None) -> dict:
    """Run all four phases; returns the opened result with this server's ledger."""
    ledger = ledger if ledger is not None else (peer.ledger or PhaseLedger())
    peer.ledger = ledger
    if isinstance(dealer, DealerClient):
        dealer.ledger = ledger
    run = PartyRun(party_id, peer, dealer or NoDealer(), ledger)
    try:
        entries = run.phase("compatibility_graph", phase_graph, cohort, cfg)
        unweighted, n_cycles = run.phase("cycle_count", phase_count, entries, cfg)
        unique = run.phase("cycle_evaluation", phase_cycles, entries, unweighted, cfg, n_cycles)
        weight, slots = run.phase("solution_evaluation", phase_solution, unique, cfg)
    except Exception as exc:
        peer.abort(str(exc) or type(exc).__name__)
        raise
    finally:
        run.dealer.done()
    return {
        "cycles": decode_cycles(slots, cfg.params.n_pairs),
        "total_weight": weight,
        "revealed_cycle_count": n_cycles,
        "ledger": ledger.to_json(),
    }


def result_identity(result: dict) -> dict:
    """The result without timing fields, for determinism comparisons."""
    out = dict(result)
    out["ledger"] = {
        phase: {k: v for k, v in stats.items() if not k.endswith("seconds")}
        for phase, stats in result.get("ledger", {}).items()
    }
    return out


# --- all roles in one process ----------------------------------------------------

@dataclass
class LocalRun:
    results: list[dict]
    transcripts: list[Transcript]
    ledgers: list[PhaseLedger]


def run_local(pairs: Sequence[PairRecord], cfg: PipelineConfig, seed: int = 0, *,
              with_dealer: bool = True, digests: bool = False,
              timeout: float = 300.0) -> LocalRun:
    """Run both servers and the dealer on threads joined by socket pairs.

    The wire path is the real one: framed messages, HELLO handshakes, dealer
    requests per phase. Inputs are shared here instead of by a provider.
    """
    rng = np.random.default_rng(seed)
    tables = share_table(encode_table(pairs), rng, cfg.params.hla_count)
    params = cfg.to_json()

    a, b = socket.socketpair()
    ledgers = [PhaseLedger(), PhaseLedger()]
    transcripts = [Transcript(digests), Transcript(digests)]
    peers = [Connection(a, first=True, ledger=ledgers[0], transcript=transcripts[0], timeout=timeout),
             Connection(b, first=False, ledger=ledgers[1], transcript=transcripts[1], timeout=timeout)]
    dealer_links = [socket.socketpair() for _ in range(2)]
    results: list = [None, None]
    errors: list = [None, None, None]

    def party(pid):
        try:
            dealer = None
            if with_dealer:
                dealer = DealerClient(Connection(dealer_links[pid][0], timeout=timeout))
                dealer.introduce(f"p{pid}", params)
            handshake(peers[pid], f"p{pid}", params, f"p{1 - pid}", initiator=(pid == 1))
            cohort = SharedCohort(pid, tables[pid], cfg.params.hla_count)
            results[pid] = run_pipeline(pid, cohort, cfg, peers[pid], dealer, ledgers[pid])
        except BaseException as exc:  # surfaced to the caller below
            errors[pid] = exc
            peers[pid].close()

    def dealer_thread():
        c0 = Connection(dealer_links[0][1], timeout=timeout)
        c1 = Connection(dealer_links[1][1], timeout=timeout)
        try:
            serve_dealer(c0, c1, seed)
        except BaseException as exc:
            errors[2] = exc
        finally:
            c0.close()
            c1.close()

    threads = [threading.Thread(target=party, args=(0,)), threading.Thread(target=party, args=(1,))]
    if with_dealer:
        threads.append(threading.Thread(target=dealer_thread))
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for s in (a, b, *[x for pair in dealer_links for x in pair]):
        s.close()
    primary = [e for e in errors[:2] if e is not None and not isinstance(e, TransportError)]
    if primary:
        raise primary[0]
    for e in errors:
        if e is not None:
            raise e
    return LocalRun(results, transcripts, ledgers)
