"""Each leaf kind's formula on a hand-built satisfying trace and a hand-built violating trace."""

import pytest

from protax import taxonomy as tx
from protax.engine import UnsupportedFormula, eval_formula, saturate, static_equiv
from protax.engine.trace import EventRecord, Trace, make_trace
from protax.terms import App, Name, app

a, b, c = Name("alice", False), Name("bob", False), Name("carol", False)
t, t1, t2 = Name("t"), Name("t1"), Name("t2")
m, m1, m2, sig, k, n, ident = Name("m"), Name("m1"), Name("m2"), Name("sig"), Name("k"), Name("n"), Name("id")
ltk, k1, sid, sck, sk, other = Name("ltk"), Name("k1"), Name("sid"), Name("sck"), Name("sk"), Name("sk_other")
pk = lambda x: app("pk", x)


def formula(leaf):
    return tx.lookup(tx.KINDS[leaf]).formula


def timed(events, knowledge_after):
    """Trace whose attacker knows ``knowledge_after[j]`` (cumulatively) after event j."""
    recs = tuple(EventRecord(i + 1, lbl, tuple(args)) for i, (lbl, args) in enumerate(events))
    known, snaps = [], []
    for j in range(len(recs) + 1):
        known += knowledge_after.get(j, [])
        snaps.append(saturate(known))
    return Trace(recs, tuple(snaps))


def traceability():
    # the claim recipe fst(msg) stands in for computeId
    def swap(u):
        if isinstance(u, App) and u.fn == "computeId":
            return app("fst", u.args[0])
        return u
    return formula("Traceability").map_terms(swap)


CASES = {
    "Aliveness": (
        make_trace([("Start", (b, c, t1)), ("End", (a, b, t))]),
        make_trace([("End", (a, b, t))]),
    ),
    "WeakAgreement": (
        make_trace([("Start", (b, a, t2)), ("End", (a, b, t1))]),
        make_trace([("Start", (b, c, t)), ("End", (a, b, t))]),
    ),
    "NonInjectiveAgreement": (
        make_trace([("Start", (b, a, t)), ("End", (a, b, t))]),
        make_trace([("Start", (b, a, t2)), ("End", (a, b, t1))]),
    ),
    "InjectiveAgreement": (
        make_trace([("Start", (b, a, t)), ("End", (a, b, t))]),
        make_trace([("Start", (b, a, t)), ("Start", (b, c, t)), ("End", (a, b, t)), ("Start", (b, a, t)), ("End", (c, b, t))]),
    ),
    "Unforgeability": (
        make_trace([("SignEvent", (a, m, sig)), ("ValidSig", (a, m, sig))]),
        make_trace([("SignEvent", (a, m1, sig)), ("ValidSig", (a, m2, sig))]),
    ),
    "NonEquivocation": (
        make_trace([("ValidSig", (k, m)), ("ValidSig", (k, m)), ("ValidSig", (sk, m1))]),
        make_trace([("ValidSig", (k, m1)), ("ValidSig", (k, m2))]),
    ),
    "Secrecy": (
        make_trace([("SecretDecl", (n,))], saturate([app("senc", n, k)])),
        make_trace([("SecretDecl", (n,))], saturate([app("senc", n, k), k])),
    ),
    "ForwardSecrecy": (
        make_trace([("LongTermKey", (ltk,)), ("SessionKey", (k1,)), ("Leaked", (ltk,))],
                   saturate([app("aenc", k1, pk(other)), ltk])),
        make_trace([("LongTermKey", (ltk,)), ("SessionKey", (k1,)), ("Leaked", (ltk,))],
                   saturate([app("aenc", k1, pk(ltk)), ltk])),
    ),
    "PostCompromiseSecurity": (
        timed([("Heal", (sid, a, b)), ("Compromise", (sid, a, b)), ("Sent", (sid, a, b, sck))], {2: [sck]}),
        timed([("Compromise", (sid, a, b)), ("Heal", (sid, a, b)), ("Sent", (sid, a, b, sck))], {1: [sck]}),
    ),
    "Anonymity": (
        make_trace([("Actor", (b, ident))], saturate([app("h", ident)])),
        make_trace([("Actor", (b, ident))], saturate([app("pair", ident, n)])),
    ),
    "Traceability": (
        make_trace([("SendMsg", (a, app("pair", a, n)))]),
        make_trace([("SendMsg", (a, app("pair", b, n)))]),
    ),
    "NonRepudiation": (
        make_trace([("Sent", (m,)), ("Obs", (m,))]),
        make_trace([("Sent", (m1,)), ("Obs", (m2,))]),
    ),
    "Accountability": (
        # key learned only after the time stamp event
        timed([("SecretBind", (n, sk)), ("Time", (t,)), ("Judged", (t, n))], {2: [sk]}),
        timed([("SecretBind", (n, sk)), ("Time", (t,)), ("Judged", (t, n))], {1: [sk]}),
    ),
}

FORMULAS = {leaf: formula(leaf) for leaf in CASES}
FORMULAS["Traceability"] = traceability()

# Unlinkability is an equivalence: its two cases are frame pairs for the static-equivalence path.
r1, r2 = Name("r1"), Name("r2")
UNLINK = (
    ([app("aenc", app("pair", n, r1), pk(sk)), app("aenc", app("pair", n, r2), pk(sk))],
     [app("aenc", app("pair", n, r1), pk(sk)), app("aenc", app("pair", m, r2), pk(sk))]),
    ([app("h", n), app("h", n)], [app("h", n), app("h", m)]),
)

TABLE = [(leaf, i == 0) for leaf in tx.LEAF_KEYWORDS for i in range(2)]


def test_table_covers_every_leaf_twice():
    assert len(TABLE) == 28
    assert set(CASES) | {"Unlinkability"} == set(tx.LEAF_KEYWORDS)


@pytest.mark.parametrize("leaf,satisfying", TABLE, ids=[f"{l}-{'sat' if s else 'viol'}" for l, s in TABLE])
def test_formula_fidelity(leaf, satisfying):
    if leaf == "Unlinkability":
        left, right = UNLINK[0 if satisfying else 1]
        assert (static_equiv(left, right, 4) is True) == satisfying
        with pytest.raises(UnsupportedFormula):
            eval_formula(tx.instantiate(tx.lookup(tx.KINDS[leaf]), _unlink_claim()), make_trace([]))
        return
    trace = CASES[leaf][0 if satisfying else 1]
    assert eval_formula(FORMULAS[leaf], trace) == satisfying


def _unlink_claim():
    from protax.ir import PropertyClaim, RoleRef
    from protax.terms import Var
    return PropertyClaim(tx.KINDS["Unlinkability"], {"role": RoleRef("R", ()), "subject": Var("s")})
