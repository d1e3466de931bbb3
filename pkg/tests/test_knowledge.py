import random

import pytest
from hypothesis import given, settings, strategies as st

from protax.engine import derivable, empty_knowledge, saturate
from protax.terms import App, Name, app

from oracles import ATOMS, SECRET, THEORY, brute_analyze, brute_derivable, public, random_term

a, b = Name("a", False), Name("b", False)
k, m, n, sk = Name("k"), Name("m"), Name("n"), Name("sk")


def corpus(count=240, seed=7):
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        base = [THEORY.normalize(random_term(rng, 3)) for _ in range(rng.randint(1, 6))]
        if rng.random() < 0.5:
            pool = [s for t in base for s in _subs(t)]
            target = rng.choice(pool)
            if rng.random() < 0.5:
                target = App("pair", (target, rng.choice(pool)))
        else:
            target = random_term(rng, 3)
        out.append((base, THEORY.normalize(target), rng.randint(0, 3)))
    return out


def _subs(t):
    yield t
    if isinstance(t, App):
        for x in t.args:
            yield from _subs(x)


CORPUS = corpus()
# number of derivable instances in CORPUS, frozen from the brute-force oracle
FROZEN_POSITIVES = 103


def test_saturate_examples():
    assert m in saturate([k, app("senc", m, k)])
    assert m not in saturate([app("senc", m, k)])
    assert m in saturate([app("sign", m, sk), app("pk", sk)])


def test_derivable_examples():
    assert derivable(saturate([a, b]), app("pair", a, b), 1)
    assert not derivable(saturate([app("senc", m, k)]), m, 3)
    for d in range(4):
        assert not derivable(empty_knowledge(), n, d)


def test_corpus_is_mixed():
    verdicts = [brute_derivable(base, t, d) for base, t, d in CORPUS]
    assert len(CORPUS) >= 200
    assert sum(verdicts) == FROZEN_POSITIVES


@pytest.mark.parametrize("idx", range(len(CORPUS)))
def test_derivable_matches_recipe_enumeration(idx):
    base, t, d = CORPUS[idx]
    assert derivable(saturate(base), t, d) == brute_derivable(base, t, d)


def _private(ts):
    return {t for t in ts if not public(t)}


@pytest.mark.parametrize("idx", range(0, len(CORPUS), 3))
def test_saturate_matches_brute_closure(idx):
    base = CORPUS[idx][0]
    assert _private(saturate(base).analyzed) == _private(brute_analyze(base))


@pytest.mark.parametrize("idx", range(len(CORPUS)))
def test_saturate_idempotent_and_monotone(idx):
    base = CORPUS[idx][0]
    once = saturate(base)
    assert saturate(once.analyzed).analyzed == once.analyzed
    assert set(once.base) <= set(once.analyzed)
    extra = CORPUS[(idx + 1) % len(CORPUS)][0]
    bigger = saturate(list(base) + list(extra))
    assert once.analyzed <= bigger.analyzed


terms = st.recursive(
    st.sampled_from(ATOMS),
    lambda inner: st.one_of(
        st.builds(lambda x, y: App("pair", (x, y)), inner, inner),
        st.builds(lambda x, y: App("senc", (x, y)), inner, inner),
        st.builds(lambda x, y: App("aenc", (x, App("pk", (y,)))), inner, inner),
        st.builds(lambda x, y: App("sign", (x, y)), inner, inner),
        st.builds(lambda x: App("h", (x,)), inner),
    ),
    max_leaves=6,
)


@settings(max_examples=200, deadline=None)
@given(st.lists(terms, max_size=5), st.lists(terms, max_size=3))
def test_saturate_monotone_property(base, extra):
    assert saturate(base).analyzed <= saturate(base + extra).analyzed


@settings(max_examples=200, deadline=None)
@given(st.lists(terms, max_size=5), terms, st.integers(0, 3))
def test_derivable_monotone_in_depth(base, t, d):
    kn = saturate(base)
    if derivable(kn, t, d):
        assert derivable(kn, t, d + 1)


def test_fresh_names_never_derivable_from_nothing():
    for s in SECRET:
        assert not derivable(saturate([]), s, 3)
