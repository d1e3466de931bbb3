"""Brute-force reference implementations used to cross-check the engine."""

from __future__ import annotations

import itertools
import random

from protax.terms import DEFAULT_SIGNATURE, DEFAULT_THEORY, App, Name, Term, Theory, contains_fn, subterms

THEORY = Theory(DEFAULT_THEORY)
DESTRUCTORS = {f.name: f.arity for f in DEFAULT_SIGNATURE if f.kind == "destructor"}
CONSTRUCTORS = {f.name: f.arity for f in DEFAULT_SIGNATURE if f.kind == "constructor"}

PUBLIC = [Name("a", False), Name("b", False)]
SECRET = [Name("k"), Name("m"), Name("n"), Name("sk")]
ATOMS = PUBLIC + SECRET


def random_term(rng: random.Random, depth: int, atoms=ATOMS) -> Term:
    if depth == 0 or rng.random() < 0.3:
        return rng.choice(atoms)
    fn = rng.choice(sorted(CONSTRUCTORS))
    return App(fn, tuple(random_term(rng, depth - 1, atoms) for _ in range(CONSTRUCTORS[fn])))


def public(t: Term) -> bool:
    return (isinstance(t, Name) and not t.fresh) or (isinstance(t, App) and not t.args)


def universe(base) -> set:
    """Every subterm of the base terms and its public key: the only possible destructor keys."""
    out = set()
    for t in base:
        for s in subterms(t):
            out.add(s)
            out.add(App("pk", (s,)))
    return out


def constructor_closure(known: set, within: set) -> set:
    """Constructor applications over ``known``, kept only when they land in ``within``."""
    out = set(known)
    changed = True
    while changed:
        changed = False
        pool = sorted(out, key=str)
        for fn, n in CONSTRUCTORS.items():
            for args in itertools.product(pool, repeat=n):
                t = App(fn, args)
                if t in within and t not in out:
                    out.add(t)
                    changed = True
    return out


def brute_analyze(base) -> set:
    """Least set closed under every destructor applied to a known term and any buildable keys."""
    base = {THEORY.normalize(t) for t in base}
    within = universe(base)
    known = set(base)
    while True:
        buildable = constructor_closure(known | {t for t in within if public(t)} | set(PUBLIC), within)
        heads = sorted(known, key=str)
        pool = sorted(buildable | known, key=str)
        new = set()
        for fn, n in DESTRUCTORS.items():
            for head, *rest in itertools.product(heads, *[pool] * (n - 1)):
                r = THEORY.normalize(App(fn, (head, *rest)))
                if not contains_fn(r, DESTRUCTORS) and r not in known:
                    new.add(r)
        # results that are not subterms of the base (e.g. the constant true) stay out of the closure
        new = {r for r in new if r in within or public(r)}
        if not new:
            return known
        known |= new


def brute_derivable(base, t: Term, depth: int) -> bool:
    """Exhaustive constructor-recipe search of nesting ``depth`` over the analyzed set."""
    known = brute_analyze(base)
    if t in known or public(t):
        return True
    targets = set(subterms(t))
    level = {s for s in targets if s in known or public(s)}
    for _ in range(depth):
        nxt = set(level)
        for s in targets:
            if isinstance(s, App) and s.args and s.fn in CONSTRUCTORS and all(a in level for a in s.args):
                nxt.add(s)
        level = nxt
    return t in level


# -- static equivalence -----------------------------------------------------------------------

FAIL = object()
FUNCTIONS = sorted((f.name, f.arity) for f in DEFAULT_SIGNATURE if f.arity > 0)


def frame_publics(*frames) -> list:
    out = {App("true")}
    for fr in frames:
        for t in fr:
            out |= {s for s in subterms(t) if isinstance(s, Name) and not s.fresh}
    return sorted(out, key=str)


def all_recipes(n_handles: int, publics, size: int):
    """Every recipe term with at most ``size`` nodes, by size; leaves are ("w", i) or public terms."""
    by_size = {1: [("w", i) for i in range(n_handles)] + list(publics)}
    for s in range(2, size + 1):
        out = []
        for fn, ar in FUNCTIONS:
            if ar == 1:
                out += [(fn, r) for r in by_size[s - 1]]
            else:
                for left in range(1, s - 1):
                    for r1 in by_size[left]:
                        for r2 in by_size[s - 1 - left]:
                            out.append((fn, r1, r2))
        by_size[s] = out
    return [r for s in sorted(by_size) for r in by_size[s]]


def run_recipe(r, frame):
    """Strict evaluation: a failed destructor anywhere fails the whole recipe."""
    if isinstance(r, tuple) and r[0] == "w":
        return frame[r[1]]
    if not isinstance(r, tuple):
        return r
    args = [run_recipe(x, frame) for x in r[1:]]
    if any(a is FAIL for a in args):
        return FAIL
    v = THEORY.normalize(App(r[0], tuple(args)))
    if r[0] in DESTRUCTORS and contains_fn(v, DESTRUCTORS):
        return FAIL
    return v


def brute_static_equiv(f1, f2, size: int) -> bool:
    f1 = [THEORY.normalize(t) for t in f1]
    f2 = [THEORY.normalize(t) for t in f2]
    pairs = set()
    for r in all_recipes(len(f1), frame_publics(f1, f2), size):
        v1, v2 = run_recipe(r, f1), run_recipe(r, f2)
        if (v1 is FAIL) != (v2 is FAIL):
            return False
        if v1 is not FAIL:
            pairs.add((v1, v2))
    pairs = sorted(pairs, key=str)
    for (x1, x2), (y1, y2) in itertools.combinations(pairs, 2):
        if (x1 == y1) != (x2 == y2):
            return False
    return True


# -- rewriting ---------------------------------------------------------------------------------

def random_mixed_term(rng: random.Random, depth: int) -> Term:
    """Random term over constructors and destructors, biased towards redexes."""
    if depth == 0 or rng.random() < 0.2:
        return rng.choice(ATOMS)
    x = random_mixed_term(rng, depth - 1)
    y = random_mixed_term(rng, depth - 1)
    choice = rng.randrange(10)
    if choice == 0:
        return App("fst", (App("pair", (x, y)),))
    if choice == 1:
        return App("snd", (App("pair", (x, y)),))
    if choice == 2:
        return App("sdec", (App("senc", (x, y)), y))
    if choice == 3:
        return App("adec", (App("aenc", (x, App("pk", (y,)))), y))
    if choice == 4:
        return App("getmsg", (App("sign", (x, y)),))
    if choice == 5:
        return App("verify", (App("sign", (x, y)), App("pk", (y,))))
    fn = rng.choice(sorted(CONSTRUCTORS) + sorted(DESTRUCTORS))
    n = CONSTRUCTORS.get(fn, DESTRUCTORS.get(fn))
    return App(fn, tuple([x, y][:n]))


def _redexes(t: Term, path=()):
    if isinstance(t, App):
        if THEORY.rewrite_top(t) is not None:
            yield path
        for i, a in enumerate(t.args):
            yield from _redexes(a, path + (i,))


def _replace_at(t: Term, path, new: Term) -> Term:
    if not path:
        return new
    i = path[0]
    args = list(t.args)
    args[i] = _replace_at(args[i], path[1:], new)
    return App(t.fn, tuple(args))


def _at(t: Term, path) -> Term:
    for i in path:
        t = t.args[i]
    return t


def random_order_normalize(t: Term, rng: random.Random) -> Term:
    """Rewrite a randomly chosen redex with a randomly ordered rule list until none remain."""
    rules = list(THEORY.rules)
    while True:
        spots = list(_redexes(t))
        if not spots:
            return t
        path = rng.choice(spots)
        rng.shuffle(rules)
        sub = _at(t, path)
        t = _replace_at(t, path, THEORY.rewrite_top(sub, rules))
