import contextlib
import threading

import numpy as np
import pytest

from kepmpc.domain import ClassWeights, CriteriaWeights
from kepmpc.mpc import Engine, PhaseLedger, dealer_generate, demand, reconstruct
from kepmpc.net.channel import connected_pair

# fixed weights for cross-implementation checks, deliberately not the defaults
FIXTURE_WEIGHTS = CriteriaWeights(w=(5, 2, 1, 2, 1), class_weights=ClassWeights(A=4, B=2, C=1))

# one line per acceptance criterion, echoed in the terminal summary
CRITERIA: list[str] = []


@contextlib.contextmanager
def criterion(number: int, name: str, detail: list):
    """Record PASS or FAIL for a criterion; ``detail`` is filled in by the body."""
    try:
        yield
    except BaseException:
        line = f"criterion {number} {name}: FAIL {' '.join(map(str, detail))}"
        CRITERIA.append(line)
        print(line)
        raise
    line = f"criterion {number} {name}: PASS {' '.join(map(str, detail))}"
    CRITERIA.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA):
            terminalreporter.write_line(line)


def run_pair(fn, seed=0):
    """Run ``fn(engine, party_id)`` on both parties over a socket pair.

    Triples are provisioned exactly from a dry run. Returns both outputs, the
    per-party ledgers and the party 0 store (to check it was used up).
    """
    counts = demand(fn, 0)
    stores = dealer_generate(counts, seed)
    conns = connected_pair(session_id=1)
    ledgers = [PhaseLedger(), PhaseLedger()]
    out, errors = [None, None], []

    def party(p):
        conns[p].ledger = ledgers[p]
        ledgers[p].begin_online("gates")
        try:
            out[p] = fn(Engine(p, conns[p], stores[p]), p)
        except BaseException as exc:
            errors.append(exc)
            conns[p].close()
        ledgers[p].finish()

    threads = [threading.Thread(target=party, args=(p,)) for p in (0, 1)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for c in conns:
        c.close()
    if errors:
        raise errors[0]
    return out, ledgers, stores


def opened(out, key=None):
    a, b = out if key is None else (out[0][key], out[1][key])
    return reconstruct(a, b).astype(np.uint64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_pair(**kw):
    """A pair that scores class A on every criterion with itself; override fields by name."""
    from kepmpc.domain import HlaVector, PairRecord

    base = dict(
        donor_hla=HlaVector.zeros(), recipient_ahla=HlaVector.zeros(),
        donor_hla_typing=HlaVector.zeros(), recipient_hla_typing=HlaVector.zeros(),
        donor_bg=0, recipient_bg=0, donor_age=0, recipient_age=0,
        donor_sex=0, recipient_sex=0, donor_weight=70, recipient_weight=70,
    )
    base.update(kw)
    return PairRecord(**base)
