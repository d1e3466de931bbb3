"""Symbolic message terms, function signatures and subterm-convergent rewriting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Union

CONSTRUCTOR = "constructor"
DESTRUCTOR = "destructor"
CONSTANT = "constant"


class MalformedTerm(ValueError):
    """A term application does not agree with the signature."""


@dataclass(frozen=True)
class Name:
    """An atomic name. Public names are known to the attacker, fresh ones are not."""

    id: str
    fresh: bool = True

    def __str__(self) -> str:
        return self.id


@dataclass(frozen=True)
class Var:
    id: str
    span: object = field(default=None, compare=False, hash=False, repr=False)

    def __str__(self) -> str:
        return self.id


@dataclass(frozen=True)
class App:
    fn: str
    args: tuple = ()
    span: object = field(default=None, compare=False, hash=False, repr=False)

    def __str__(self) -> str:
        if not self.args:
            return self.fn
        return f"{self.fn}({', '.join(str(a) for a in self.args)})"


Term = Union[Name, Var, App]


def app(fn: str, *args: Term) -> App:
    return App(fn, tuple(args))


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    arity: int
    kind: str = CONSTRUCTOR

    def __post_init__(self):
        if self.arity < 0:
            raise ValueError(f"negative arity for {self.name}")
        if self.kind == CONSTANT and self.arity != 0:
            raise ValueError(f"constant {self.name} must have arity 0")


@dataclass(frozen=True)
class RewriteRule:
    lhs: App
    rhs: Term

    @property
    def destructor(self) -> str:
        return self.lhs.fn

    def __str__(self) -> str:
        return f"{self.lhs} = {self.rhs}"


# -- structural helpers -------------------------------------------------------


def variables(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.id}
    if isinstance(t, App):
        out: set[str] = set()
        for a in t.args:
            out |= variables(a)
        return out
    return set()


def names(t: Term) -> set[Name]:
    if isinstance(t, Name):
        return {t}
    if isinstance(t, App):
        out: set[Name] = set()
        for a in t.args:
            out |= names(a)
        return out
    return set()


def is_ground(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    if isinstance(t, App):
        return all(is_ground(a) for a in t.args)
    return True


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, App):
        for a in t.args:
            yield from subterms(a)


def is_subterm(small: Term, big: Term) -> bool:
    return any(s == small for s in subterms(big))


def contains_fn(t: Term, fns: Iterable[str]) -> bool:
    fns = set(fns)
    return any(isinstance(s, App) and s.fn in fns for s in subterms(t))


def term_key(t: Term) -> tuple:
    """Canonical ordering: kind, then constructor name, then arity, then arguments."""
    if isinstance(t, Name):
        return (0, t.id, int(t.fresh))
    if isinstance(t, Var):
        return (1, t.id)
    return (2, t.fn, len(t.args), tuple(term_key(a) for a in t.args))


def sort_terms(ts: Iterable[Term]) -> list[Term]:
    return sorted(ts, key=term_key)


def substitute(t: Term, binding: Mapping[str, Term]) -> Term:
    """Simultaneous substitution of variables (by id)."""
    if isinstance(t, Var):
        return binding.get(t.id, t)
    if isinstance(t, App):
        if not t.args:
            return t
        return App(t.fn, tuple(substitute(a, binding) for a in t.args))
    return t


def match(pattern: Term, t: Term, binding: dict | None = None) -> dict | None:
    """Syntactic matching of ``pattern`` against ground ``t``; returns the extended binding."""
    b = {} if binding is None else dict(binding)
    stack = [(pattern, t)]
    while stack:
        p, u = stack.pop()
        if isinstance(p, Var):
            if p.id in b:
                if b[p.id] != u:
                    return None
            else:
                b[p.id] = u
        elif isinstance(p, App):
            if not isinstance(u, App) or u.fn != p.fn or len(u.args) != len(p.args):
                return None
            stack.extend(zip(p.args, u.args))
        elif p != u:
            return None
    return b


# -- signature and theory -----------------------------------------------------


class Signature:
    """Lookup table over a list of function specs; immutable after construction."""

    def __init__(self, fns: Iterable[FunctionSpec]):
        self._fns: dict[str, FunctionSpec] = {}
        for f in fns:
            self._fns[f.name] = f

    def __contains__(self, name: str) -> bool:
        return name in self._fns

    def __getitem__(self, name: str) -> FunctionSpec:
        return self._fns[name]

    def get(self, name: str) -> FunctionSpec | None:
        return self._fns.get(name)

    def __iter__(self):
        return iter(self._fns.values())

    def constructors(self) -> set[str]:
        return {f.name for f in self._fns.values() if f.kind != DESTRUCTOR}

    def destructors(self) -> set[str]:
        return {f.name for f in self._fns.values() if f.kind == DESTRUCTOR}

    def constants(self) -> list[App]:
        return [App(f.name) for f in sorted(self._fns.values(), key=lambda f: f.name) if f.arity == 0]


def _v(x):
    return Var(x)


DEFAULT_SIGNATURE: tuple[FunctionSpec, ...] = (
    FunctionSpec("true", 0, CONSTANT),
    FunctionSpec("pair", 2),
    FunctionSpec("fst", 1, DESTRUCTOR),
    FunctionSpec("snd", 1, DESTRUCTOR),
    FunctionSpec("senc", 2),
    FunctionSpec("sdec", 2, DESTRUCTOR),
    FunctionSpec("aenc", 2),
    FunctionSpec("adec", 2, DESTRUCTOR),
    FunctionSpec("pk", 1),
    FunctionSpec("sign", 2),
    FunctionSpec("verify", 2, DESTRUCTOR),
    FunctionSpec("getmsg", 1, DESTRUCTOR),
    FunctionSpec("h", 1),
)

_m, _k, _sk, _a, _b = _v("m"), _v("k"), _v("sk"), _v("a"), _v("b")

DEFAULT_THEORY: tuple[RewriteRule, ...] = (
    RewriteRule(app("fst", app("pair", _a, _b)), _a),
    RewriteRule(app("snd", app("pair", _a, _b)), _b),
    RewriteRule(app("sdec", app("senc", _m, _k), _k), _m),
    RewriteRule(app("adec", app("aenc", _m, app("pk", _sk)), _sk), _m),
    RewriteRule(app("verify", app("sign", _m, _sk), app("pk", _sk)), App("true")),
    RewriteRule(app("getmsg", app("sign", _m, _sk)), _m),
)

BUILTIN_NAMES = frozenset(f.name for f in DEFAULT_SIGNATURE)


def check_term(t: Term, sig: Signature) -> None:
    """Raise MalformedTerm on unknown functions or arity mismatches."""
    for s in subterms(t):
        if isinstance(s, App):
            f = sig.get(s.fn)
            if f is None:
                raise MalformedTerm(f"unknown function {s.fn}")
            if f.arity != len(s.args):
                raise MalformedTerm(f"{s.fn} expects {f.arity} arguments, got {len(s.args)}")


def is_subterm_convergent(rule: RewriteRule) -> bool:
    rhs = rule.rhs
    if not variables(rhs) <= variables(rule.lhs):
        return False
    if isinstance(rhs, App) and not rhs.args:
        return True
    return any(is_subterm(rhs, a) for a in rule.lhs.args)


class Theory:
    """A subterm-convergent rewrite system indexed by destructor."""

    def __init__(self, rules: Iterable[RewriteRule]):
        self.rules: tuple[RewriteRule, ...] = tuple(rules)
        self._by_head: dict[str, list[RewriteRule]] = {}
        for r in self.rules:
            self._by_head.setdefault(r.destructor, []).append(r)
        self._cache: dict[Term, Term] = {}

    @property
    def destructors(self) -> set[str]:
        return set(self._by_head)

    def rules_for(self, fn: str) -> list[RewriteRule]:
        return self._by_head.get(fn, [])

    def rewrite_top(self, t: App, order: Iterable[RewriteRule] | None = None) -> Term | None:
        for r in (order if order is not None else self._by_head.get(t.fn, ())):
            if r.destructor != t.fn:
                continue
            b = match(r.lhs, t)
            if b is not None:
                return substitute(r.rhs, b)
        return None

    def normalize(self, t: Term) -> Term:
        """Innermost normal form. Subterm-convergence makes the result order independent."""
        if not isinstance(t, App) or not t.args:
            return t
        hit = self._cache.get(t)
        if hit is not None:
            return hit
        args = tuple(self.normalize(a) for a in t.args)
        u = App(t.fn, args)
        if t.fn in self._by_head:
            r = self.rewrite_top(u)
            if r is not None:
                u = self.normalize(r)
        if len(self._cache) > 200_000:
            self._cache.clear()
        self._cache[t] = u
        return u

    def is_normal(self, t: Term) -> bool:
        return self.normalize(t) == t

    def reduces(self, t: Term) -> bool:
        """True when the normal form of ``t`` contains no destructor."""
        return not contains_fn(self.normalize(t), self._by_head)


def normalize(t: Term, theory: Iterable[RewriteRule] | Theory, sig: Signature | None = None) -> Term:
    if sig is not None:
        check_term(t, sig)
    th = theory if isinstance(theory, Theory) else Theory(theory)
    return th.normalize(t)


def default_signature(extra: Iterable[FunctionSpec] = ()) -> Signature:
    return Signature(list(DEFAULT_SIGNATURE) + list(extra))


def default_theory(extra: Iterable[RewriteRule] = ()) -> Theory:
    return Theory(list(DEFAULT_THEORY) + list(extra))


def render(t: Term) -> str:
    return str(t)
