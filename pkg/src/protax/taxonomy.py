"""The property taxonomy: categories, leaf kinds, first-order templates and instrumentation needs.

Each leaf kind owns a guarded correspondence formula over trace events.  The
formulas are kept as data so that the evaluator, the code generators and the
JSON catalog all render the same object.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Union

from .terms import App, Term, Var, substitute

if TYPE_CHECKING:  # pragma: no cover
    from .ir import PropertyClaim, ProtocolSpec


class CategoryNotLeaf(ValueError):
    pass


class MissingBinding(ValueError):
    pass


CATEGORIES = ("Authentication", "Confidentiality", "Integrity", "Privacy", "Accountability")


@dataclass(frozen=True)
class PropertyKind:
    category: str
    leaf: str | None = None

    @property
    def is_leaf(self) -> bool:
        return self.leaf is not None

    @property
    def keyword(self) -> str:
        if self.leaf is None:
            return self.category
        return LEAF_KEYWORDS[self.leaf]

    def __str__(self) -> str:
        return self.leaf or self.category


_TREE = {
    "Authentication": ("Aliveness", "WeakAgreement", "NonInjectiveAgreement", "InjectiveAgreement"),
    "Confidentiality": ("Secrecy", "ForwardSecrecy", "PostCompromiseSecurity"),
    "Integrity": ("Unforgeability", "NonEquivocation"),
    "Privacy": ("Anonymity", "Unlinkability"),
    "Accountability": ("Traceability", "NonRepudiation", "Accountability"),
}

LEAF_KEYWORDS = {
    "Aliveness": "aliveness",
    "WeakAgreement": "weak_agreement",
    "NonInjectiveAgreement": "non_injective_agreement",
    "InjectiveAgreement": "injective_agreement",
    "Secrecy": "secrecy",
    "ForwardSecrecy": "forward_secrecy",
    "PostCompromiseSecurity": "post_compromise_security",
    "Unforgeability": "unforgeability",
    "NonEquivocation": "non_equivocation",
    "Anonymity": "anonymity",
    "Unlinkability": "unlinkability",
    "Traceability": "traceability",
    "NonRepudiation": "non_repudiation",
    "Accountability": "accountability",
}

KINDS: dict[str, PropertyKind] = {
    leaf: PropertyKind(cat, leaf) for cat, leaves in _TREE.items() for leaf in leaves
}
BY_KEYWORD: dict[str, PropertyKind] = {LEAF_KEYWORDS[k]: v for k, v in KINDS.items()}
CATEGORY_KINDS: dict[str, PropertyKind] = {c: PropertyKind(c) for c in CATEGORIES}

_CATEGORY_HINT = {
    "Authentication": "aliveness, weak_agreement, non_injective_agreement or injective_agreement",
    "Confidentiality": "secrecy, forward_secrecy or post_compromise_security",
    "Integrity": "unforgeability or non_equivocation",
    "Privacy": "anonymity or unlinkability",
    "Accountability": "traceability, non_repudiation or accountability",
}


def category_message(category: str) -> str:
    return f"category is not a checkable kind; choose {_CATEGORY_HINT[category]}"


def kind_from_keyword(word: str) -> PropertyKind | None:
    """Leaf kinds by DSL keyword; bare category names (any case) map to category kinds."""
    if word in BY_KEYWORD:
        return BY_KEYWORD[word]
    for c in CATEGORIES:
        if word.lower() == c.lower():
            return CATEGORY_KINDS[c]
    return None


def leaves() -> list[PropertyKind]:
    return [KINDS[leaf] for leaves_ in _TREE.values() for leaf in leaves_]


def _require_leaf(kind: PropertyKind) -> None:
    if not kind.is_leaf:
        raise CategoryNotLeaf(category_message(kind.category))


# -- formulas -------------------------------------------------------------------


@dataclass(frozen=True)
class EventAtom:
    label: str
    args: tuple
    time: str

    def render(self) -> str:
        return f"{self.label}({', '.join(str(a) for a in self.args)})@{self.time}"


@dataclass(frozen=True)
class KnowledgeAtom:
    term: Term
    time: str | None = None


@dataclass(frozen=True)
class Before:
    earlier: str
    later: str


@dataclass(frozen=True)
class NotEqual:
    left: str
    right: str


@dataclass(frozen=True)
class Eq:
    left: Term
    right: Term


@dataclass(frozen=True)
class NotKnown:
    term: Term


@dataclass(frozen=True)
class NegExists:
    variables: tuple
    atoms: tuple
    constraints: tuple


Atom = Union[EventAtom, KnowledgeAtom]
Constraint = Union[Before, NotEqual, Eq, NotKnown]


@dataclass(frozen=True)
class GuardedFormula:
    """forall universals. premises & guards ==> exists existentials. conclusions & constraints.

    With ``outer_negation`` the formula reads: not exists universals. premises & guards.
    """

    universals: tuple = ()
    premises: tuple = ()
    guards: tuple = ()
    existentials: tuple = ()
    conclusions: tuple = ()
    constraints: tuple = ()
    negated_uniqueness: NegExists | None = None
    outer_negation: bool = False

    def event_atoms(self):
        yield from (a for a in self.premises if isinstance(a, EventAtom))
        yield from self.conclusions
        if self.negated_uniqueness:
            yield from (a for a in self.negated_uniqueness.atoms if isinstance(a, EventAtom))

    def relabel(self, mapping: dict[str, str]) -> "GuardedFormula":
        def ev(a):
            if isinstance(a, EventAtom) and a.label in mapping:
                return replace(a, label=mapping[a.label])
            return a

        nu = self.negated_uniqueness
        if nu is not None:
            nu = replace(nu, atoms=tuple(ev(a) for a in nu.atoms))
        return replace(
            self,
            premises=tuple(ev(a) for a in self.premises),
            conclusions=tuple(ev(a) for a in self.conclusions),
            negated_uniqueness=nu,
        )

    def map_terms(self, fn) -> "GuardedFormula":
        def at(a):
            if isinstance(a, EventAtom):
                return replace(a, args=tuple(fn(x) for x in a.args))
            if isinstance(a, KnowledgeAtom):
                return replace(a, term=fn(a.term))
            return a

        def con(c):
            if isinstance(c, Eq):
                return Eq(fn(c.left), fn(c.right))
            if isinstance(c, NotKnown):
                return NotKnown(fn(c.term))
            return c

        nu = self.negated_uniqueness
        if nu is not None:
            nu = replace(nu, atoms=tuple(at(a) for a in nu.atoms), constraints=tuple(con(c) for c in nu.constraints))
        return replace(
            self,
            premises=tuple(at(a) for a in self.premises),
            guards=tuple(con(c) for c in self.guards),
            conclusions=tuple(at(a) for a in self.conclusions),
            constraints=tuple(con(c) for c in self.constraints),
            negated_uniqueness=nu,
        )


EQUIVALENCE_MARKER = "P(s) | P(s) ~ P(s) | P(t)"


@dataclass(frozen=True)
class PropertyTemplate:
    kind: PropertyKind
    formula: GuardedFormula | None
    requirements: tuple
    equivalence: str | None = None


def _V(*names):
    return tuple(Var(n) for n in names)


A, B, T, T1, T2, A2, B2 = _V("A", "B", "t", "t1", "t2", "A2", "B2")
M, SIG, K, M1, M2, X = _V("m", "sig", "k", "m1", "m2", "x")
LTK, K1, SCK, SID, ID, C, SK = _V("ltk", "k1", "sck", "sid", "id", "c", "sk")


def _ev(label, *args, time):
    return EventAtom(label, tuple(args), time)


_FORMULAS: dict[str, GuardedFormula | None] = {
    "Aliveness": GuardedFormula(
        universals=("A", "B", "t", "i"),
        premises=(_ev("End", A, B, T, time="i"),),
        existentials=("A2", "t2", "j"),
        conclusions=(_ev("Start", B, A2, T2, time="j"),),
    ),
    "WeakAgreement": GuardedFormula(
        universals=("A", "B", "t1", "i"),
        premises=(_ev("End", A, B, T1, time="i"),),
        existentials=("t2", "j"),
        conclusions=(_ev("Start", B, A, T2, time="j"),),
    ),
    "NonInjectiveAgreement": GuardedFormula(
        universals=("A", "B", "t", "i"),
        premises=(_ev("End", A, B, T, time="i"),),
        existentials=("j",),
        conclusions=(_ev("Start", B, A, T, time="j"),),
    ),
    "InjectiveAgreement": GuardedFormula(
        universals=("A", "B", "t", "i"),
        premises=(_ev("End", A, B, T, time="i"),),
        existentials=("j",),
        conclusions=(_ev("Start", B, A, T, time="j"),),
        constraints=(Before("j", "i"),),
        negated_uniqueness=NegExists(("A2", "B2", "i2"), (_ev("End", A2, B2, T, time="i2"),), (NotEqual("i2", "i"),)),
    ),
    "Unforgeability": GuardedFormula(
        universals=("A", "m", "sig", "i"),
        premises=(_ev("ValidSig", A, M, SIG, time="i"),),
        existentials=("j",),
        conclusions=(_ev("SignEvent", A, M, SIG, time="j"),),
    ),
    "NonEquivocation": GuardedFormula(
        universals=("k", "m1", "m2", "i1", "i2"),
        premises=(_ev("ValidSig", K, M1, time="i1"), _ev("ValidSig", K, M2, time="i2")),
        constraints=(Eq(M1, M2),),
    ),
    "Secrecy": GuardedFormula(
        universals=("x", "i"),
        premises=(_ev("SecretDecl", X, time="i"),),
        constraints=(NotKnown(X),),
    ),
    "ForwardSecrecy": GuardedFormula(
        universals=("ltk", "k1", "t1", "t2", "i"),
        premises=(_ev("SessionKey", K1, time="t1"), _ev("LongTermKey", LTK, time="i"), _ev("Leaked", LTK, time="t2")),
        guards=(Before("t1", "t2"),),
        constraints=(NotKnown(K1),),
    ),
    "PostCompromiseSecurity": GuardedFormula(
        universals=("A", "B", "sck", "sid", "i", "j", "k"),
        premises=(
            _ev("Sent", SID, A, B, SCK, time="i"),
            KnowledgeAtom(SCK, "j"),
            _ev("Heal", SID, A, B, time="k"),
        ),
        guards=(Before("k", "i"),),
        existentials=("l",),
        conclusions=(_ev("Compromise", SID, A, B, time="l"),),
        constraints=(Before("k", "l"),),
    ),
    "Anonymity": GuardedFormula(
        universals=("B", "id", "i"),
        premises=(_ev("Actor", B, ID, time="i"),),
        constraints=(NotKnown(ID),),
    ),
    "Unlinkability": None,
    "Traceability": GuardedFormula(
        universals=("A", "m", "i"),
        premises=(_ev("SendMsg", A, M, time="i"),),
        constraints=(Eq(App("computeId", (M,)), A),),
    ),
    "NonRepudiation": GuardedFormula(
        universals=("m", "i"),
        premises=(_ev("Obs", M, time="i"),),
        existentials=("j",),
        conclusions=(_ev("Sent", M, time="j"),),
    ),
    "Accountability": GuardedFormula(
        universals=("c", "sk", "t", "i", "j", "k", "l"),
        premises=(
            _ev("Judged", T, C, time="i"),
            _ev("SecretBind", C, SK, time="j"),
            KnowledgeAtom(SK, "k"),
            _ev("Time", T, time="l"),
        ),
        guards=(Before("k", "l"),),
        outer_negation=True,
    ),
}

# (label, arity) pairs; arity excludes the time index.
EVENT_ARITIES = {
    ("End", 3), ("Start", 3), ("ValidSig", 3), ("ValidSig", 2), ("SignEvent", 3), ("SecretDecl", 1),
    ("SessionKey", 1), ("LongTermKey", 1), ("Leaked", 1), ("Sent", 4), ("Sent", 1), ("Heal", 3),
    ("Compromise", 3), ("Actor", 2), ("SendMsg", 2), ("Obs", 1), ("Judged", 2), ("SecretBind", 2), ("Time", 1),
}
EVENT_LABELS = tuple(sorted({lbl for lbl, _ in EVENT_ARITIES}))

# Predicate symbols as written in the property definitions -> event label (K is a knowledge atom).
PREDICATE_LABELS = {
    "end": "End", "start": "Start", "valid_sig": "ValidSig", "sign_event": "SignEvent",
    "secret": "SecretDecl", "sessionKey": "SessionKey", "longTermKey": "LongTermKey", "leaked": "Leaked",
    "sent": "Sent", "heal": "Heal", "compromise": "Compromise", "actor": "Actor", "send": "SendMsg",
    "obs": "Obs", "Judged": "Judged", "Secret": "SecretBind", "Time": "Time",
}

# Premise events are only recorded for sessions whose identity parameters are honest;
# the value lists identity-typed argument positions per (label, arity).
PREMISE_IDENTITY_ARGS = {
    ("End", 3): (0, 1), ("ValidSig", 3): (0,), ("ValidSig", 2): (), ("SecretDecl", 1): (),
    ("SessionKey", 1): (), ("LongTermKey", 1): (), ("Sent", 4): (1, 2),
    ("Heal", 3): (1, 2), ("Actor", 2): (0,), ("SendMsg", 2): (0,), ("Obs", 1): (),
}
HOOK_LABELS = {"Judged": 2, "SecretBind": 2, "Time": 1}

_REQUIREMENTS = {
    "Aliveness": (("Start", "responder-first-meaningful-step"), ("End", "initiator-completion")),
    "WeakAgreement": (("Start", "responder-first-meaningful-step"), ("End", "initiator-completion")),
    "NonInjectiveAgreement": (("Start", "responder-first-meaningful-step"), ("End", "initiator-completion")),
    "InjectiveAgreement": (("Start", "responder-first-meaningful-step"), ("End", "initiator-completion")),
    "Unforgeability": (("SignEvent", "after-signing-before-send"), ("ValidSig", "after-successful-verification")),
    "NonEquivocation": (("ValidSig", "after-successful-verification"),),
    "Secrecy": (("SecretDecl", "secret-binding"),),
    "ForwardSecrecy": (("SessionKey", "session-key-binding"), ("LongTermKey", "role-start"), ("Leaked", "engine-reveal-move")),
    "PostCompromiseSecurity": (("Sent", "before-keyed-send"), ("Heal", "heal-point"), ("Compromise", "engine-compromise-move")),
    "Anonymity": (("Actor", "identity-binding"),),
    "Unlinkability": (),
    "Traceability": (("SendMsg", "before-message-send"),),
    "NonRepudiation": (("Obs", "receiver-completion"), ("Sent", "before-message-send")),
    "Accountability": (("Judged", "user-hook"), ("SecretBind", "user-hook"), ("Time", "user-hook")),
}

AUTH_CHAIN = ("Aliveness", "WeakAgreement", "NonInjectiveAgreement", "InjectiveAgreement")


def lookup(kind: PropertyKind) -> PropertyTemplate:
    _require_leaf(kind)
    leaf = kind.leaf
    return PropertyTemplate(
        kind=kind,
        formula=_FORMULAS[leaf],
        requirements=_REQUIREMENTS[leaf],
        equivalence=EQUIVALENCE_MARKER if leaf == "Unlinkability" else None,
    )


def required_events(kind: PropertyKind) -> list[tuple[str, str]]:
    _require_leaf(kind)
    return list(_REQUIREMENTS[kind.leaf])


def implies(a: PropertyKind, b: PropertyKind) -> bool:
    """Whether holding ``a`` guarantees ``b`` (Lowe's authentication chain, reflexively closed)."""
    _require_leaf(a)
    _require_leaf(b)
    if a == b:
        return True
    if a.leaf in AUTH_CHAIN and b.leaf in AUTH_CHAIN:
        return AUTH_CHAIN.index(a.leaf) >= AUTH_CHAIN.index(b.leaf)
    return False


# -- claim argument schemas --------------------------------------------------------


@dataclass(frozen=True)
class ArgSpec:
    name: str
    kind: str  # "role" | "term" | "var" | "list"
    role_vars: int = 0
    required: bool = True


def _auth_schema():
    return (
        ArgSpec("initiator", "role", 2),
        ArgSpec("responder", "role", 2),
        ArgSpec("data", "term"),
    )


CLAIM_SCHEMAS: dict[str, tuple[ArgSpec, ...]] = {
    "Aliveness": _auth_schema(),
    "WeakAgreement": _auth_schema(),
    "NonInjectiveAgreement": _auth_schema(),
    "InjectiveAgreement": _auth_schema(),
    "Secrecy": (ArgSpec("role", "role"), ArgSpec("term", "term")),
    "ForwardSecrecy": (ArgSpec("role", "role"), ArgSpec("key", "term")),
    "PostCompromiseSecurity": (
        ArgSpec("sender", "role", 2),
        ArgSpec("sid", "term"),
        ArgSpec("key", "term"),
        ArgSpec("heal_after", "var"),
        ArgSpec("state", "list"),
    ),
    "Unforgeability": (ArgSpec("signer", "role", 1), ArgSpec("verifier", "role", 1)),
    "NonEquivocation": (ArgSpec("verifier", "role"),),
    "Anonymity": (ArgSpec("role", "role", 1), ArgSpec("id", "term")),
    "Unlinkability": (ArgSpec("role", "role"), ArgSpec("subject", "var")),
    "Traceability": (ArgSpec("sender", "role", 1), ArgSpec("message", "term"), ArgSpec("recipe", "term")),
    "NonRepudiation": (ArgSpec("sender", "role"), ArgSpec("receiver", "role"), ArgSpec("message", "term")),
    "Accountability": (),
}

RECIPE_VAR = "msg"


def claim_schema(kind: PropertyKind) -> tuple[ArgSpec, ...]:
    _require_leaf(kind)
    return CLAIM_SCHEMAS[kind.leaf]


def auth_scope(claim: "PropertyClaim") -> str:
    return f"{claim.args['initiator'].role}_{claim.args['responder'].role}"


def scoped(label: str, scope: str) -> str:
    return f"{label}_{scope}" if scope else label


def base_label(label: str) -> str:
    return label.split("_", 1)[0]


@dataclass(frozen=True)
class CheckableFormula:
    kind: PropertyKind
    formula: GuardedFormula | None
    equivalence: str | None = None
    role: str | None = None
    subject: str | None = None
    labels: tuple = field(default=())

    @property
    def is_equivalence(self) -> bool:
        return self.formula is None


def instantiate(template: PropertyTemplate, claim: "PropertyClaim", spec: "ProtocolSpec | None" = None) -> CheckableFormula:
    if claim.kind != template.kind:
        raise ValueError("claim kind does not match template")
    for a in CLAIM_SCHEMAS[template.kind.leaf]:
        if a.required and a.name not in claim.args:
            raise MissingBinding(f"{template.kind.keyword} claim lacks '{a.name}'")
    if spec is not None:
        names = {r.name for r in spec.roles}
        for v in claim.args.values():
            role = getattr(v, "role", None)
            if role is not None and role not in names:
                raise MissingBinding(f"unknown role {role}")
    leaf = template.kind.leaf
    f = template.formula
    if f is None:
        return CheckableFormula(
            template.kind, None, template.equivalence,
            role=claim.args["role"].role, subject=claim.args["subject"].id,
        )
    if leaf in AUTH_CHAIN:
        sc = auth_scope(claim)
        f = f.relabel({"End": scoped("End", sc), "Start": scoped("Start", sc)})
    if leaf == "Traceability":
        recipe = claim.args["recipe"]

        def swap(t):
            if isinstance(t, App):
                if t.fn == "computeId":
                    return substitute(recipe, {RECIPE_VAR: t.args[0]})
                return App(t.fn, tuple(swap(a) for a in t.args))
            return t

        f = f.map_terms(swap)
    labels = tuple(sorted({(a.label, len(a.args)) for a in f.event_atoms()}))
    return CheckableFormula(template.kind, f, labels=labels)


# -- rendering ------------------------------------------------------------------------


def _sx_term(t) -> str:
    if isinstance(t, App) and t.args:
        return "(" + " ".join([t.fn] + [_sx_term(a) for a in t.args]) + ")"
    return str(t)


def _sx_atom(a) -> str:
    if isinstance(a, EventAtom):
        return "(" + " ".join([a.label] + [_sx_term(x) for x in a.args] + ["@" + a.time]) + ")"
    if isinstance(a, KnowledgeAtom):
        return f"(K {_sx_term(a.term)}" + (f" @{a.time})" if a.time else ")")
    if isinstance(a, Before):
        return f"(< {a.earlier} {a.later})"
    if isinstance(a, NotEqual):
        return f"(!= {a.left} {a.right})"
    if isinstance(a, Eq):
        return f"(= {_sx_term(a.left)} {_sx_term(a.right)})"
    if isinstance(a, NotKnown):
        return f"(not (K {_sx_term(a.term)}))"
    raise TypeError(a)


def _sx_and(parts: list[str]) -> str:
    if not parts:
        return "true"
    if len(parts) == 1:
        return parts[0]
    return "(and " + " ".join(parts) + ")"


def to_sexpr(f: GuardedFormula | None) -> str:
    if f is None:
        return "(equiv (par (P s) (P s)) (par (P s) (P t)))"
    prem = _sx_and([_sx_atom(a) for a in f.premises + f.guards])
    if f.outer_negation:
        return f"(not (exists ({' '.join(f.universals)}) {prem}))"
    concl = [_sx_atom(a) for a in f.conclusions + f.constraints]
    if f.negated_uniqueness is not None:
        nu = f.negated_uniqueness
        inner = _sx_and([_sx_atom(a) for a in nu.atoms + nu.constraints])
        concl.append(f"(not (exists ({' '.join(nu.variables)}) {inner}))")
    body = _sx_and(concl)
    if f.existentials:
        body = f"(exists ({' '.join(f.existentials)}) {body})"
    return f"(forall ({' '.join(f.universals)}) (=> {prem} {body}))"


def catalog() -> dict:
    """Machine-readable taxonomy: category -> kinds -> formula and required events."""
    out: dict = {"schema": "protax.taxonomy/1", "categories": []}
    for cat, leaves_ in _TREE.items():
        kinds = []
        for leaf in leaves_:
            t = lookup(KINDS[leaf])
            kinds.append({
                "kind": leaf,
                "keyword": LEAF_KEYWORDS[leaf],
                "formula": to_sexpr(t.formula),
                "required_events": [{"label": l, "location": loc} for l, loc in t.requirements],
            })
        out["categories"].append({"category": cat, "kinds": kinds})
    return out
