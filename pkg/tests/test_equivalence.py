import random

import pytest

from protax.engine import Distinguisher, static_equiv
from protax.engine.equivalence import eval_recipe
from protax.terms import App, Name, app, contains_fn

from oracles import ATOMS, DESTRUCTORS, THEORY, brute_static_equiv, random_term

a, b = Name("a", False), Name("b", False)
k, m, r = Name("k"), Name("m"), Name("r")


def _rename(t, mapping):
    if isinstance(t, Name):
        return mapping.get(t, t)
    if isinstance(t, App):
        return App(t.fn, tuple(_rename(x, mapping) for x in t.args))
    return t


def frame_pairs(count=120, seed=11):
    rng = random.Random(seed)
    out = []
    for i in range(count):
        n = rng.randint(1, 4)
        f1 = [THEORY.normalize(random_term(rng, 2)) for _ in range(n)]
        mode = i % 4
        if mode == 0:
            f2 = [THEORY.normalize(random_term(rng, 2)) for _ in range(n)]
        elif mode == 1:
            # swap public values: hidden only when they sit under a secret
            f2 = [_rename(t, {a: b, b: a}) for t in f1]
        elif mode == 2:
            # rename secrets: never observable
            f2 = [_rename(t, {k: Name("k2"), m: Name("m2")}) for t in f1]
        else:
            j = rng.randrange(n)
            f2 = list(f1)
            f2[j] = _rename(f1[j], {rng.choice(ATOMS): r})
        out.append((f1, f2, rng.randint(1, 4)))
    return out


PAIRS = frame_pairs()
# count of equivalent pairs in PAIRS, frozen from the exhaustive recipe-pair oracle
FROZEN_EQUIVALENT = 86


def _holds(w):
    return w is True


def test_examples():
    assert static_equiv([app("senc", a, k)], [app("senc", b, k)], 4) is True
    w = static_equiv([app("senc", a, k), k], [app("senc", b, k), k], 4)
    assert isinstance(w, Distinguisher)
    f = [app("pair", a, k), app("h", m)]
    assert static_equiv(f, f, 4) is True


def test_corpus_is_mixed():
    assert len(PAIRS) >= 100
    assert sum(brute_static_equiv(f1, f2, d) for f1, f2, d in PAIRS) == FROZEN_EQUIVALENT


@pytest.mark.parametrize("idx", range(len(PAIRS)))
def test_matches_recipe_pair_enumeration(idx):
    f1, f2, d = PAIRS[idx]
    assert _holds(static_equiv(f1, f2, d)) == brute_static_equiv(f1, f2, d)


def _evaluates(recipe, frame):
    v = eval_recipe(recipe, frame, THEORY)
    return None if contains_fn(v, DESTRUCTORS) else v


@pytest.mark.parametrize("idx", range(len(PAIRS)))
def test_distinguishers_replay(idx):
    f1, f2, d = PAIRS[idx]
    w = static_equiv(f1, f2, d)
    if w is True:
        return
    if w.kind == "reduction":
        assert (_evaluates(w.left, f1) is None) != (_evaluates(w.left, f2) is None)
    else:
        l1, r1 = _evaluates(w.left, f1), _evaluates(w.right, f1)
        l2, r2 = _evaluates(w.left, f2), _evaluates(w.right, f2)
        assert None not in (l1, r1, l2, r2)
        assert (l1 == r1) != (l2 == r2)


@pytest.mark.parametrize("idx", range(len(PAIRS)))
def test_symmetric_and_reflexive(idx):
    f1, f2, d = PAIRS[idx]
    assert _holds(static_equiv(f1, f2, d)) == _holds(static_equiv(f2, f1, d))
    assert static_equiv(f1, f1, d) is True
    assert static_equiv(f2, f2, d) is True


@pytest.mark.parametrize("idx", range(len(PAIRS)))
def test_extending_frames_keeps_inequivalence(idx):
    f1, f2, d = PAIRS[idx]
    if _holds(static_equiv(f1, f2, d)):
        return
    for extra in (k, m, app("pair", a, b)):
        assert not _holds(static_equiv(f1 + [extra], f2 + [extra], d))


def test_distinguishing_key_witness():
    w = static_equiv([app("senc", a, k), k], [app("senc", b, k), k], 4)
    assert w.kind == "equality"
    assert {str(w.left), str(w.right)} == {"a", "sdec(w1, w2)"}
