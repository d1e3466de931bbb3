"""Shared pieces of the model emitters."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .. import taxonomy as tx
from ..instrument import InstrumentedSpec
from ..ir import Event
from ..terms import App, Name, Term, Var

PROVERIF = "proverif"
TAMARIN = "tamarin"
EXTENSIONS = {PROVERIF: ".pv", TAMARIN: ".spthy"}


class UnsupportedForDialect(ValueError):
    pass


@dataclass(frozen=True)
class Provenance:
    claim: int
    kind: str
    target: str
    name: str | None
    lines: tuple[int, int]

    def to_json(self) -> dict:
        return {"claim": self.claim, "kind": self.kind, "target": self.target, "name": self.name,
                "lines": list(self.lines)}


@dataclass(frozen=True)
class EmittedModel:
    dialect: str
    name: str
    text: str
    provenance: tuple = ()
    verdicts: dict = field(default_factory=dict, compare=False)

    @property
    def filename(self) -> str:
        return self.name + EXTENSIONS[self.dialect]

    def provenance_json(self) -> str:
        rows = [p.to_json() for p in self.provenance]
        for r in rows:
            if r["name"] in self.verdicts:
                r["prover_verdict"] = self.verdicts[r["name"]]
        return json.dumps(rows, indent=2, sort_keys=True) + "\n"


class Doc:
    """Line buffer that records 1-based line ranges of marked regions."""

    def __init__(self):
        self.lines: list[str] = []

    def add(self, *lines: str) -> tuple[int, int]:
        start = len(self.lines) + 1
        for chunk in lines:
            self.lines.extend(chunk.split("\n"))
        return start, len(self.lines)

    def blank(self) -> None:
        if self.lines and self.lines[-1] != "":
            self.lines.append("")

    def text(self) -> str:
        while self.lines and self.lines[-1] == "":
            self.lines.pop()
        return "\n".join(self.lines) + "\n"


def query_name(claim_index: int, kind: tx.PropertyKind) -> str:
    return f"{kind.keyword}_{claim_index}"


def model_name(spec_name: str) -> str:
    out = "".join(ch if ch.isalnum() or ch == "_" else "_" for ch in spec_name)
    if not out or not out[0].isalpha():
        out = "p_" + out
    return out


def event_arities(ispec: InstrumentedSpec) -> dict[str, set[int]]:
    """Every event label used by roles or claims, with the arities it appears at."""
    seen: dict[str, set[int]] = {}
    for r in ispec.base.roles:
        for s in ispec.role_steps(r.name):
            if isinstance(s, Event):
                seen.setdefault(s.label, set()).add(len(s.args))
    for _, cf in ispec.claim_formulas:
        for label, arity in cf.labels:
            seen.setdefault(label, set()).add(arity)
    return seen


class EventNames:
    """Dialect event names; a label used at several arities gets the arity as suffix."""

    def __init__(self, arities: dict[str, set[int]], rename=lambda s: s):
        self.arities = arities
        self.rename = rename

    def __call__(self, label: str, arity: int) -> str:
        base = self.rename(label)
        if len(self.arities.get(label, ())) > 1:
            return f"{base}{arity}"
        return base

    def declared(self) -> list[tuple[str, int]]:
        return sorted((self(l, a), a) for l, ars in self.arities.items() for a in ars)


def formula_times(f: tx.GuardedFormula) -> set[str]:
    out = set()
    atoms = list(f.premises) + list(f.conclusions)
    cons = list(f.guards) + list(f.constraints)
    if f.negated_uniqueness is not None:
        atoms += list(f.negated_uniqueness.atoms)
        cons += list(f.negated_uniqueness.constraints)
    for a in atoms:
        if getattr(a, "time", None):
            out.add(a.time)
    for c in cons:
        if isinstance(c, tx.Before):
            out |= {c.earlier, c.later}
        elif isinstance(c, tx.NotEqual):
            out |= {c.left, c.right}
    return out


def term_vars(t: Term) -> list[str]:
    out: list[str] = []

    def go(u):
        if isinstance(u, Var):
            if u.id not in out:
                out.append(u.id)
        elif isinstance(u, App):
            for a in u.args:
                go(a)

    go(t)
    return out


def names_in(t: Term) -> list[Name]:
    out: list[Name] = []

    def go(u):
        if isinstance(u, Name):
            if u not in out:
                out.append(u)
        elif isinstance(u, App):
            for a in u.args:
                go(a)

    go(t)
    return out
