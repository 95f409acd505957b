"""Per-phase communication and timing counters."""

from __future__ import annotations

import time
from dataclasses import dataclass, field


class LedgerError(RuntimeError):
    pass


@dataclass
class PhaseStats:
    setup_bytes: int = 0
    setup_messages: int = 0
    online_bytes: int = 0
    online_messages: int = 0
    rounds: int = 0
    reveals: int = 0
    reveal_bytes: int = 0
    setup_seconds: float = 0.0
    online_seconds: float = 0.0
    online_started: bool = False

    def to_json(self) -> dict:
        return {
            "setup_bytes": self.setup_bytes,
            "online_bytes": self.online_bytes,
            "rounds": self.rounds,
            "reveals": self.reveals,
            "setup_seconds": round(self.setup_seconds, 6),
            "online_seconds": round(self.online_seconds, 6),
            "seconds": round(self.setup_seconds + self.online_seconds, 6),
        }


@dataclass
class PhaseLedger:
    """Counters keyed by phase name.

    Setup counters of a phase freeze once that phase's online part starts;
    all counters only ever grow.
    """

    phases: dict[str, PhaseStats] = field(default_factory=dict)
    current: str = "default"
    _mark: float = 0.0

    def stats(self, name: str | None = None) -> PhaseStats:
        return self.phases.setdefault(name or self.current, PhaseStats())

    def begin_setup(self, name: str):
        self._close()
        self.current = name
        st = self.stats()
        if st.online_started:
            raise LedgerError(f"phase {name!r} is already online")
        self._mark = time.perf_counter()

    def begin_online(self, name: str | None = None):
        self._close()
        if name is not None:
            self.current = name
        self.stats().online_started = True
        self._mark = time.perf_counter()

    def _close(self):
        if not self._mark:
            return
        st = self.stats()
        elapsed = time.perf_counter() - self._mark
        if st.online_started:
            st.online_seconds += elapsed
        else:
            st.setup_seconds += elapsed
        self._mark = 0.0

    def finish(self):
        self._close()

    def add_setup(self, nbytes: int):
        st = self.stats()
        if st.online_started:
            raise LedgerError(f"setup traffic after phase {self.current!r} went online")
        st.setup_bytes += nbytes
        st.setup_messages += 1

    def add_round(self, nbytes: int):
        st = self.stats()
        st.online_started = True
        st.online_bytes += nbytes
        st.online_messages += 1
        st.rounds += 1

    def add_reveal(self, nbytes: int):
        st = self.stats()
        st.online_started = True
        st.reveals += 1
        st.reveal_bytes += nbytes

    def total(self) -> PhaseStats:
        out = PhaseStats()
        for st in self.phases.values():
            out.setup_bytes += st.setup_bytes
            out.setup_messages += st.setup_messages
            out.online_bytes += st.online_bytes
            out.online_messages += st.online_messages
            out.rounds += st.rounds
            out.reveals += st.reveals
            out.reveal_bytes += st.reveal_bytes
            out.setup_seconds += st.setup_seconds
            out.online_seconds += st.online_seconds
        return out

    def to_json(self) -> dict:
        return {name: st.to_json() for name, st in self.phases.items()}
