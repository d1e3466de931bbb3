"""Dolev-Yao attacker knowledge: destructor saturation and bounded synthesis."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

from ..terms import DEFAULT_THEORY, App, Name, Term, Theory, match, substitute


def is_public(t: Term) -> bool:
    """Public names and constants are known to everyone."""
    if isinstance(t, Name):
        return not t.fresh
    return isinstance(t, App) and not t.args


@dataclass(frozen=True, eq=False)
class Knowledge:
    base: frozenset
    analyzed: frozenset = field(default=frozenset())

    def __eq__(self, other):
        return isinstance(other, Knowledge) and self.base == other.base

    def __hash__(self):
        return hash(self.base)

    def __contains__(self, t: Term) -> bool:
        return t in self.analyzed

    def add(self, terms: Iterable[Term], theory: Theory) -> "Knowledge":
        new = frozenset(terms) - self.base
        if not new:
            return self
        return Knowledge(self.base | new, _close(self.analyzed, new, theory))


class _Rules:
    """Rewrite rules indexed by the head of their first left-hand argument."""

    def __init__(self, theory: Theory):
        self.destructors = frozenset(theory.destructors)
        self.by_head: dict[str | None, list] = {}
        for r in theory.rules:
            first = r.lhs.args[0] if r.lhs.args else None
            key = first.fn if isinstance(first, App) else None
            self.by_head.setdefault(key, []).append(r)


_RULE_INDEX: dict[int, tuple[Theory, _Rules]] = {}


def _rules(theory: Theory) -> _Rules:
    hit = _RULE_INDEX.get(id(theory))
    if hit is None or hit[0] is not theory:
        hit = (theory, _Rules(theory))
        _RULE_INDEX[id(theory)] = hit
    return hit[1]


def synthesizable(analyzed, t: Term, destructors) -> bool:
    """Buildable from ``analyzed`` with any number of constructor applications."""
    if t in analyzed or is_public(t):
        return True
    if isinstance(t, App) and t.args and t.fn not in destructors:
        return all(synthesizable(analyzed, a, destructors) for a in t.args)
    return False


def _close(analyzed: frozenset, new: frozenset, theory: Theory) -> frozenset:
    return _close_cached(analyzed, new, theory)


@lru_cache(maxsize=65536)
def _close_cached(analyzed: frozenset, new: frozenset, theory: Theory) -> frozenset:
    idx = _rules(theory)
    known = set(analyzed) | set(new)
    changed = True
    while changed:
        changed = False
        for u in sorted(known, key=str):
            if not isinstance(u, App) or not u.args:
                continue
            for rule in idx.by_head.get(u.fn, []) + idx.by_head.get(None, []):
                b = match(rule.lhs.args[0], u)
                if b is None:
                    continue
                others = [substitute(a, b) for a in rule.lhs.args[1:]]
                if not all(synthesizable(known, o, idx.destructors) for o in others):
                    continue
                r = theory.normalize(substitute(rule.rhs, b))
                if r not in known:
                    known.add(r)
                    changed = True
    return frozenset(known)


def saturate(k: Knowledge | Iterable[Term], theory: Theory | None = None) -> Knowledge:
    """Least fixpoint of destructor application over the observed terms."""
    theory = theory or Theory(DEFAULT_THEORY)
    base = k.base if isinstance(k, Knowledge) else frozenset(theory.normalize(t) for t in k)
    return Knowledge(base, _close(frozenset(), base, theory))


def derivable(k: Knowledge, t: Term, depth: int, theory: Theory | None = None) -> bool:
    """t is analyzed or public, or built from such terms by at most ``depth`` nested constructors."""
    destructors = theory.destructors if theory is not None else {r.lhs.fn for r in DEFAULT_THEORY}
    return _derivable(k.analyzed, t, depth, frozenset(destructors))


def _derivable(analyzed, t: Term, depth: int, destructors) -> bool:
    if t in analyzed or is_public(t):
        return True
    if depth <= 0 or not isinstance(t, App) or not t.args or t.fn in destructors:
        return False
    return all(_derivable(analyzed, a, depth - 1, destructors) for a in t.args)


def empty_knowledge() -> Knowledge:
    return Knowledge(frozenset(), frozenset())
