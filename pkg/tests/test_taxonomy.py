import itertools
import json
import random

import pytest

from protax import taxonomy as tx
from protax.dsl import parse_file
from protax.engine import eval_formula
from protax.engine.trace import make_trace
from protax.instrument import instrument
from protax.terms import App, Name, Var
from protax.fixtures_path import fixture

K = tx.KINDS
CHAIN = [K[leaf] for leaf in tx.AUTH_CHAIN]


def test_leaves_sit_under_their_categories():
    assert K["ForwardSecrecy"].category == "Confidentiality"
    assert K["Traceability"].category == "Accountability"
    assert len(tx.leaves()) == 14
    assert {k.category for k in tx.leaves()} == set(tx.CATEGORIES)


def test_lookup_aliveness_shape():
    f = tx.lookup(K["Aliveness"]).formula
    assert [a.label for a in f.premises] == ["End"]
    assert [a.label for a in f.conclusions] == ["Start"]
    # start(B, _, _, j): only the responder is constrained
    assert f.conclusions[0].args[0] == f.premises[0].args[1]
    assert not f.constraints


def test_lookup_non_equivocation_shape():
    f = tx.lookup(K["NonEquivocation"]).formula
    assert [a.label for a in f.premises] == ["ValidSig", "ValidSig"]
    assert f.constraints == (tx.Eq(Var("m1"), Var("m2")),)


def test_lookup_rejects_categories():
    for c in tx.CATEGORIES:
        with pytest.raises(tx.CategoryNotLeaf):
            tx.lookup(tx.PropertyKind(c))
        with pytest.raises(tx.CategoryNotLeaf):
            tx.required_events(tx.PropertyKind(c))


def test_required_events():
    assert {l for l, _ in tx.required_events(K["Unforgeability"])} == {"SignEvent", "ValidSig"}
    assert {l for l, _ in tx.required_events(K["Secrecy"])} == {"SecretDecl"}
    assert {l for l, _ in tx.required_events(K["PostCompromiseSecurity"])} == {"Sent", "Heal", "Compromise"}
    assert dict(tx.required_events(K["Unforgeability"]))["SignEvent"] == "after-signing-before-send"


def test_implies():
    assert tx.implies(K["InjectiveAgreement"], K["Aliveness"])
    assert not tx.implies(K["Aliveness"], K["WeakAgreement"])
    assert tx.implies(K["Secrecy"], K["Secrecy"])
    assert not tx.implies(K["Secrecy"], K["ForwardSecrecy"])
    with pytest.raises(tx.CategoryNotLeaf):
        tx.implies(tx.PropertyKind("Privacy"), K["Secrecy"])


def test_every_label_used_and_every_predicate_mapped():
    used = set()
    for leaf in tx.LEAF_KEYWORDS:
        f = tx.lookup(K[leaf]).formula
        if f is not None:
            used |= {(a.label, len(a.args)) for a in f.event_atoms()}
    assert used == tx.EVENT_ARITIES
    predicates = ["end", "start", "valid_sig", "sign_event", "secret", "sessionKey", "longTermKey", "leaked",
                  "sent", "heal", "compromise", "actor", "send", "obs", "Judged", "Secret", "Time"]
    assert sorted(tx.PREDICATE_LABELS) == sorted(predicates)
    assert len(set(tx.PREDICATE_LABELS.values())) == len(predicates)
    assert set(tx.PREDICATE_LABELS.values()) == set(tx.EVENT_LABELS)


def test_catalog_is_json():
    cat = json.loads(json.dumps(tx.catalog()))
    assert [c["category"] for c in cat["categories"]] == list(tx.CATEGORIES)
    assert sum(len(c["kinds"]) for c in cat["categories"]) == 14
    alive = cat["categories"][0]["kinds"][0]
    assert alive["formula"].startswith("(forall (A B t i) (=> (End A B t @i)")


def test_instantiate_secrecy_and_traceability():
    spec = parse_file(fixture("secrecy"))
    cf = tx.instantiate(tx.lookup(spec.claims[0].kind), spec.claims[0], spec)
    assert cf.labels == (("SecretDecl", 1),)
    assert cf.formula.constraints == (tx.NotKnown(Var("x")),)
    spec = parse_file(fixture("traceability"))
    cf = tx.instantiate(tx.lookup(spec.claims[0].kind), spec.claims[0], spec)
    assert cf.formula.constraints == (tx.Eq(App("fst", (Var("m"),)), Var("A")),)


def test_instantiate_nsl_injective():
    spec = parse_file(fixture("nsl"))
    claim = spec.claims[3]
    cf = tx.instantiate(tx.lookup(claim.kind), claim, spec)
    f = cf.formula
    assert f.premises[0].label == "End_B_A" and f.conclusions[0].label == "Start_B_A"
    assert f.constraints == (tx.Before("j", "i"),)
    assert f.negated_uniqueness.atoms[0].label == "End_B_A"
    ispec = instrument(spec)
    assert dict(ispec.claim_formulas)[claim].labels == (("End_B_A", 3), ("Start_B_A", 3))


def test_instantiate_missing_binding():
    from protax.ir import PropertyClaim
    with pytest.raises(tx.MissingBinding):
        tx.instantiate(tx.lookup(K["Secrecy"]), PropertyClaim(K["Secrecy"], {}))


# -- Lowe hierarchy on random traces -------------------------------------------------------------

AGENTS = [Name("alice", False), Name("bob", False), Name("eve", False)]
DATA = [Name("d1"), Name("d2")]


def random_trace(rng):
    events = []
    for _ in range(rng.randint(1, 6)):
        x, y = rng.sample(AGENTS, 2)
        events.append((rng.choice(["Start", "End"]), (x, y, rng.choice(DATA))))
    return make_trace(events)


def test_lowe_hierarchy_on_random_traces():
    rng = random.Random(2024)
    formulas = {k: tx.lookup(k).formula for k in CHAIN}
    separated = set()
    for _ in range(1500):
        tr = random_trace(rng)
        holds = {k: eval_formula(formulas[k], tr) for k in CHAIN}
        for x, y in itertools.product(CHAIN, CHAIN):
            if tx.implies(x, y):
                assert not holds[x] or holds[y], (x, y, tr)
            elif holds[x] and not holds[y]:
                separated.add((x, y))
    # every non-implication in the chain is witnessed by some trace
    expected = {(x, y) for x, y in itertools.product(CHAIN, CHAIN) if not tx.implies(x, y)}
    assert separated == expected
