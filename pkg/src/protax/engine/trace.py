from __future__ import annotations

from dataclasses import dataclass, field

from ..terms import DEFAULT_THEORY, Term, Theory, render
from .knowledge import Knowledge, empty_knowledge


@dataclass(frozen=True)
class EventRecord:
    t: int  # 1-based time index
    label: str
    args: tuple

    def to_json(self) -> dict:
        return {"t": self.t, "event": self.label, "args": [render(a) for a in self.args]}


@dataclass(frozen=True)
class Trace:
    """Events in order plus attacker knowledge at each time point.

    ``snapshots[j]`` is the knowledge after event j and before event j+1; index 0 is
    the knowledge before the first event and the last entry is the final knowledge.
    """

    records: tuple = ()
    snapshots: tuple = ()
    theory: Theory | None = field(default=None, compare=False, hash=False, repr=False)
    depth: int = field(default=4, compare=False)

    def __post_init__(self):
        for i, r in enumerate(self.records):
            if r.t != i + 1:
                raise ValueError("trace time indices must be 1..n")

    def __len__(self) -> int:
        return len(self.records)

    def knowledge_at(self, j: int | None) -> Knowledge:
        if not self.snapshots:
            return empty_knowledge()
        if j is None or j >= len(self.snapshots):
            return self.snapshots[-1]
        return self.snapshots[j]

    @property
    def final_knowledge(self) -> Knowledge:
        return self.knowledge_at(None)

    def get_theory(self) -> Theory:
        return self.theory if self.theory is not None else _DEFAULT

    def to_json(self) -> list[dict]:
        return [r.to_json() for r in self.records]


_DEFAULT = Theory(DEFAULT_THEORY)


def make_trace(events, knowledge=None, theory: Theory | None = None, depth: int = 4) -> Trace:
    """Build a trace from ``(label, args)`` pairs; ``knowledge`` is the final attacker knowledge."""
    recs = tuple(EventRecord(i + 1, label, tuple(args)) for i, (label, args) in enumerate(events))
    snaps = ()
    if knowledge is not None:
        snaps = tuple([knowledge] * (len(recs) + 1))
    return Trace(recs, snaps, theory, depth)


def term_list(ts) -> list[str]:
    return [render(t) for t in ts]


__all__ = ["EventRecord", "Trace", "make_trace", "Term"]
