"""Syntactic unification with occurs check."""

from __future__ import annotations

from ..terms import App, Term, Var, substitute


def _walk(t: Term, s: dict) -> Term:
    while isinstance(t, Var) and t.id in s:
        t = s[t.id]
    return t


def _occurs(v: str, t: Term, s: dict) -> bool:
    t = _walk(t, s)
    if isinstance(t, Var):
        return t.id == v
    if isinstance(t, App):
        return any(_occurs(v, a, s) for a in t.args)
    return False


def unify(a: Term, b: Term, subst: dict | None = None, prefer=None) -> dict | None:
    """Most general unifier extending ``subst``, fully resolved; None if none exists.

    ``prefer(var_id)`` marks variables that should stay as representatives when two
    variables meet (they are bound last).
    """
    s = dict(subst or {})
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x, y = _walk(x, s), _walk(y, s)
        if x == y:
            continue
        if isinstance(x, Var) and isinstance(y, Var) and prefer is not None and prefer(x.id) and not prefer(y.id):
            x, y = y, x
        if isinstance(x, Var):
            if _occurs(x.id, y, s):
                return None
            s[x.id] = y
        elif isinstance(y, Var):
            if _occurs(y.id, x, s):
                return None
            s[y.id] = x
        elif isinstance(x, App) and isinstance(y, App):
            if x.fn != y.fn or len(x.args) != len(y.args):
                return None
            stack.extend(zip(x.args, y.args))
        else:
            return None
    return resolve(s)


def resolve(s: dict) -> dict:
    out = {}
    for k in s:
        t = s[k]
        seen = 0
        while True:
            t2 = substitute(t, s)
            if t2 == t or seen > 64:
                break
            t, seen = t2, seen + 1
        out[k] = t
    return out


def compose(first: dict, second: dict) -> dict:
    """Substitution equivalent to applying ``first`` then ``second``."""
    out = {k: substitute(v, second) for k, v in first.items()}
    for k, v in second.items():
        out.setdefault(k, v)
    return out
