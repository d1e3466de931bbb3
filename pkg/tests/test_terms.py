import random

import pytest
from hypothesis import given, settings, strategies as st

from protax.terms import (
    App, FunctionSpec, MalformedTerm, Name, RewriteRule, Var, app, default_signature, is_subterm_convergent,
    normalize, substitute,
)

from oracles import THEORY, random_mixed_term, random_order_normalize

a, b, c = Name("a", False), Name("b", False), Name("c", False)
m, sk = Name("m"), Name("sk")
x, y = Var("x"), Var("y")


def test_normalize_examples():
    assert normalize(app("adec", app("aenc", m, app("pk", sk)), sk), THEORY) == m
    assert normalize(m, THEORY) == m
    assert normalize(app("fst", app("pair", app("snd", app("pair", a, b)), c)), THEORY) == b


def test_normalize_checks_arity():
    with pytest.raises(MalformedTerm):
        normalize(app("pair", a), THEORY, default_signature())
    with pytest.raises(MalformedTerm):
        normalize(app("nosuch", a), THEORY, default_signature())


def test_substitute_examples():
    assert substitute(app("pair", x, y), {"x": a, "y": b}) == app("pair", a, b)
    assert substitute(a, {"x": b}) == a
    assert substitute(app("senc", x, x), {"x": Name("k")}) == app("senc", Name("k"), Name("k"))


def test_substitute_is_simultaneous():
    assert substitute(app("pair", x, y), {"x": y, "y": x}) == app("pair", y, x)


@pytest.mark.parametrize("seed", range(10))
def test_confluence_random_orders(seed):
    # 10 seeds x 110 terms, each normalized under 3 random strategies
    rng = random.Random(seed)
    for _ in range(110):
        t = random_mixed_term(rng, rng.randint(1, 5))
        expected = THEORY.normalize(t)
        for _ in range(3):
            assert random_order_normalize(t, rng) == expected
        assert THEORY.normalize(expected) == expected


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 10**9))
def test_normalize_idempotent(seed):
    t = random_mixed_term(random.Random(seed), 5)
    n = THEORY.normalize(t)
    assert THEORY.normalize(n) == n
    assert all(THEORY.rewrite_top(s) is None for s in _apps(n))


def _apps(t):
    if isinstance(t, App):
        yield t
        for u in t.args:
            yield from _apps(u)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**9))
def test_substitute_distributes(seed):
    rng = random.Random(seed)
    t = random_mixed_term(rng, 3)
    pattern = App("pair", (t, x))
    sigma = {"x": random_mixed_term(rng, 2)}
    assert substitute(pattern, sigma) == App("pair", (substitute(t, sigma), substitute(x, sigma)))


def test_subterm_convergence_check():
    assert is_subterm_convergent(RewriteRule(app("fst", app("pair", x, y)), x))
    assert not is_subterm_convergent(RewriteRule(app("fst", app("pair", x, y)), app("h", x)))
    with pytest.raises(ValueError):
        FunctionSpec("c", 1, "constant")
