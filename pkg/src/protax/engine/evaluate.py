"""First-order evaluation of guarded formulas over finite traces."""

from __future__ import annotations

from ..taxonomy import (
    Before, CheckableFormula, Eq, EventAtom, GuardedFormula, KnowledgeAtom, NotEqual, NotKnown,
)
from ..terms import is_ground, match, substitute
from .knowledge import derivable
from .trace import Trace


class UnsupportedFormula(ValueError):
    """Equivalence properties are not trace formulas."""


def _order(atoms):
    # bind term variables through events before testing knowledge
    return [a for a in atoms if isinstance(a, EventAtom)] + [a for a in atoms if not isinstance(a, EventAtom)]


def _known(tr: Trace, term, j):
    return derivable(tr.knowledge_at(j), term, tr.depth, tr.get_theory())


def _solutions(atoms, binding: dict, times: dict, tr: Trace):
    if not atoms:
        yield binding, times
        return
    a, rest = atoms[0], atoms[1:]
    if isinstance(a, EventAtom):
        for rec in tr.records:
            if rec.label != a.label or len(rec.args) != len(a.args):
                continue
            if a.time in times and times[a.time] != rec.t:
                continue
            b = binding
            for p, v in zip(a.args, rec.args):
                b = match(p, v, b)
                if b is None:
                    break
            if b is None:
                continue
            yield from _solutions(rest, b, {**times, a.time: rec.t}, tr)
    elif isinstance(a, KnowledgeAtom):
        term = substitute(a.term, binding)
        if not is_ground(term):
            raise ValueError(f"knowledge atom over unbound term {term}")
        if a.time is None:
            if _known(tr, term, None):
                yield from _solutions(rest, binding, times, tr)
            return
        n = max(len(tr.snapshots), 1)
        choices = [times[a.time]] if a.time in times else range(n)
        for j in choices:
            if _known(tr, term, j):
                yield from _solutions(rest, binding, {**times, a.time: j}, tr)
    else:
        raise TypeError(f"unexpected atom {a!r}")


def _holds(c, binding: dict, times: dict, tr: Trace) -> bool:
    if isinstance(c, Before):
        return times[c.earlier] < times[c.later]
    if isinstance(c, NotEqual):
        return times[c.left] != times[c.right]
    if isinstance(c, Eq):
        th = tr.get_theory()
        return th.normalize(substitute(c.left, binding)) == th.normalize(substitute(c.right, binding))
    if isinstance(c, NotKnown):
        return not _known(tr, substitute(c.term, binding), None)
    raise TypeError(f"unexpected constraint {c!r}")


def _all(cs, b, t, tr) -> bool:
    return all(_holds(c, b, t, tr) for c in cs)


def _premise_matches(f: GuardedFormula, tr: Trace):
    for b, t in _solutions(_order(f.premises), {}, {}, tr):
        if _all(f.guards, b, t, tr):
            yield b, t


def _conclusion_holds(f: GuardedFormula, b: dict, t: dict, tr: Trace) -> bool:
    for b2, t2 in _solutions(_order(f.conclusions), b, t, tr):
        if not _all(f.constraints, b2, t2, tr):
            continue
        nu = f.negated_uniqueness
        if nu is not None:
            clash = any(
                _all(nu.constraints, b3, t3, tr) for b3, t3 in _solutions(_order(nu.atoms), b2, t2, tr)
            )
            if clash:
                continue
        return True
    return False


def _formula(f) -> GuardedFormula:
    if isinstance(f, CheckableFormula):
        if f.formula is None:
            raise UnsupportedFormula("unlinkability is checked by static equivalence, not on traces")
        return f.formula
    if f is None:
        raise UnsupportedFormula("no trace formula")
    return f


def counterexample(f, tr: Trace) -> dict | None:
    """The first premise match falsifying ``f`` (term and time bindings), or None."""
    g = _formula(f)
    for b, t in _premise_matches(g, tr):
        if g.outer_negation or not _conclusion_holds(g, b, t, tr):
            return {"terms": b, "times": t}
    return None


def eval_formula(f, tr: Trace) -> bool:
    return counterexample(f, tr) is None
