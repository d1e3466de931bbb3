"""Event instrumentation: place the events each claim's formula talks about."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import taxonomy as tx
from .diagnostics import ValidationReport
from .ir import (
    LTK, Event, Fresh, Let, PropertyClaim, ProtocolSpec, Recv, RoleScript, Send, binding_index, bound_before,
    validate_spec,
)
from .terms import App, Term, Var, is_subterm, variables


class InstrumentationError(ValueError):
    pass


class UnplaceableEvent(InstrumentationError):
    """A required location class does not occur in the role."""


class MissingHookEvent(InstrumentationError):
    """An accountability claim needs user-written Judged/SecretBind/Time events."""


# labels produced by engine moves rather than by protocol steps
ENGINE_LABELS = frozenset({"Leaked", "Compromise"})


@dataclass(frozen=True)
class Insertion:
    role: str
    index: int  # insert before base step ``index``; len(steps) appends
    event: Event

    def __iter__(self):
        return iter((self.role, self.index, self.event))


@dataclass(frozen=True)
class InstrumentedSpec:
    base: ProtocolSpec
    inserted_events: tuple = ()
    claim_formulas: tuple = ()
    warnings: tuple = field(default=(), compare=False)

    def role_steps(self, role: str) -> tuple:
        r = self.base.role(role)
        if r is None:
            raise KeyError(role)
        by_index: dict[int, list[Event]] = {}
        for ins in self.inserted_events:
            if ins.role == role:
                by_index.setdefault(ins.index, []).append(ins.event)
        out = []
        for i in range(len(r.steps) + 1):
            out.extend(by_index.get(i, ()))
            if i < len(r.steps):
                out.append(r.steps[i])
        return tuple(out)

    def materialize(self) -> ProtocolSpec:
        """The base spec with inserted events written out as ordinary event steps."""
        roles = tuple(replace(r, steps=self.role_steps(r.name)) for r in self.base.roles)
        return replace(self.base, roles=roles)

    def erase(self) -> ProtocolSpec:
        return self.base


def _has_event(role: RoleScript, label: str, arity: int) -> bool:
    return any(isinstance(s, Event) and s.label == label and len(s.args) == arity for s in role.steps)


def _ready_index(role: RoleScript, terms, start: int = 0) -> int:
    """Smallest index >= start at which every variable of ``terms`` is bound."""
    idx = start
    for t in terms:
        for v in variables(t):
            b = binding_index(role, v)
            if b is None:
                raise UnplaceableEvent(f"{v} is never bound in role {role.name}")
            idx = max(idx, b + 1)
    return idx


def _first(role: RoleScript, pred, start: int = 0):
    hits = [i for i, s in enumerate(role.steps) if i >= start and pred(s)]
    return hits


def _let_head(fn: str):
    return lambda s: isinstance(s, Let) and isinstance(s.term, App) and s.term.fn == fn


def _sends_containing(t: Term):
    return lambda s: isinstance(s, Send) and is_subterm(t, s.term)


class _Builder:
    def __init__(self, spec: ProtocolSpec):
        self.spec = spec
        self.items: list[Insertion] = []
        self.report = ValidationReport()

    def add(self, role: RoleScript, index: int, label: str, args) -> None:
        args = tuple(args)
        if _has_event(role, label, len(args)):
            return  # user-written event shadows automatic placement
        ins = Insertion(role.name, index, Event(label, args))
        if ins not in self.items:
            self.items.append(ins)

    def warn(self, msg: str, span=None) -> None:
        self.report.add(msg, span, "warning")


def _place(b: _Builder, claim: PropertyClaim) -> None:
    spec, leaf, args = b.spec, claim.kind.leaf, claim.args
    role_of = lambda key: spec.role(args[key].role)

    if leaf in tx.AUTH_CHAIN:
        scope = tx.auth_scope(claim)
        ini, res = role_of("initiator"), role_of("responder")
        data = args["data"]
        ai, ar = args["initiator"].vars, args["responder"].vars
        b.add(ini, len(ini.steps), tx.scoped("End", scope), (Var(ai[0]), Var(ai[1]), data))
        start_args = (Var(ar[0]), Var(ar[1]), data)
        recvs = _first(res, lambda s: isinstance(s, Recv))
        if recvs:
            idx = _ready_index(res, start_args, recvs[0] + 1)
        else:
            idx = _ready_index(res, start_args)
            b.warn(f"responder {res.name} never receives; Start placed where its arguments are bound", claim.span)
        b.add(res, idx, tx.scoped("Start", scope), start_args)

    elif leaf == "Unforgeability":
        signer, verifier = role_of("signer"), role_of("verifier")
        signs = _first(signer, _let_head("sign"))
        if not signs:
            raise UnplaceableEvent(f"unforgeability: role {signer.name} has no 'let x = sign(..)' step")
        if len(signs) > 1:
            b.warn(f"unforgeability: role {signer.name} signs more than once; using the first signing step", claim.span)
        st = signer.steps[signs[0]]
        b.add(signer, signs[0] + 1, "SignEvent", (Var(args["signer"].vars[0]), st.term.args[0], Var(st.var)))
        checks = _first(verifier, _let_head("verify"))
        if not checks:
            raise UnplaceableEvent(f"unforgeability: role {verifier.name} has no 'let x = verify(..)' step")
        if len(checks) > 1:
            b.warn(f"unforgeability: role {verifier.name} verifies more than once; using the first check", claim.span)
        sig = verifier.steps[checks[0]].term.args[0]
        b.add(verifier, checks[0] + 1, "ValidSig", (Var(args["verifier"].vars[0]), App("getmsg", (sig,)), sig))

    elif leaf == "NonEquivocation":
        verifier = role_of("verifier")
        checks = _first(verifier, _let_head("verify"))
        if not checks:
            raise UnplaceableEvent(f"non_equivocation: role {verifier.name} has no 'let x = verify(..)' step")
        if len(checks) > 1:
            b.warn(f"non_equivocation: role {verifier.name} verifies more than once; using the first check", claim.span)
        sig, key = verifier.steps[checks[0]].term.args
        b.add(verifier, checks[0] + 1, "ValidSig", (key, App("getmsg", (sig,))))

    elif leaf == "Secrecy":
        role, t = role_of("role"), args["term"]
        fresh = [i for i, s in enumerate(role.steps) if isinstance(s, Fresh) and Var(s.var) == t]
        if fresh:
            b.add(role, fresh[0] + 1, "SecretDecl", (t,))
        else:
            b.warn(f"secrecy: {t} is not generated by role {role.name}; declared at its first binding", claim.span)
            b.add(role, _ready_index(role, (t,)), "SecretDecl", (t,))

    elif leaf == "ForwardSecrecy":
        role, k = role_of("role"), args["key"]
        b.add(role, _ready_index(role, (k,)), "SessionKey", (k,))
        found = False
        for r in spec.roles:
            for p in r.params:
                if p.kind == LTK:
                    b.add(r, 0, "LongTermKey", (Var(p.name),))
                    found = True
        if not found:
            raise UnplaceableEvent("forward_secrecy: no role holds a long-term key to reveal")

    elif leaf == "PostCompromiseSecurity":
        role = role_of("sender")
        a, bb = (Var(v) for v in args["sender"].vars)
        sid, key, heal = args["sid"], args["key"], args["heal_after"]
        hidx = _ready_index(role, (heal, sid, a, bb))
        b.add(role, hidx, "Heal", (sid, a, bb))
        sends = _first(role, _sends_containing(key), hidx)
        if not sends:
            raise UnplaceableEvent(f"post_compromise_security: role {role.name} never sends {key} after healing")
        b.add(role, _ready_index(role, (sid, key), sends[0]), "Sent", (sid, a, bb, key))

    elif leaf == "Anonymity":
        role, ident = role_of("role"), args["id"]
        actor = Var(args["role"].vars[0])
        b.add(role, _ready_index(role, (actor, ident)), "Actor", (actor, ident))

    elif leaf == "Traceability":
        role, m = role_of("sender"), args["message"]
        sends = _first(role, _sends_containing(m))
        if not sends:
            raise UnplaceableEvent(f"traceability: role {role.name} never sends {m}")
        a = Var(args["sender"].vars[0])
        b.add(role, sends[0], "SendMsg", (a, m))

    elif leaf == "NonRepudiation":
        sender, receiver, m = role_of("sender"), role_of("receiver"), args["message"]
        sends = _first(sender, _sends_containing(m))
        if not sends:
            raise UnplaceableEvent(f"non_repudiation: role {sender.name} never sends {m}")
        b.add(sender, sends[0], "Sent", (m,))
        b.add(receiver, len(receiver.steps), "Obs", (m,))

    elif leaf == "Accountability":
        for label, arity in sorted(tx.HOOK_LABELS.items()):
            if not any(_has_event(r, label, arity) for r in spec.roles):
                raise MissingHookEvent(
                    f"accountability needs a user-written 'event {label}(..)' step with {arity} argument(s)"
                )

    elif leaf == "Unlinkability":
        pass  # equivalence claims need no events


def instrument(spec: ProtocolSpec) -> InstrumentedSpec:
    report = validate_spec(spec)
    if not report.ok:
        raise InstrumentationError("cannot instrument an invalid spec: " + report.errors[0].message)
    b = _Builder(spec)
    formulas = []
    for claim in spec.claims:
        _place(b, claim)
        formulas.append((claim, tx.instantiate(tx.lookup(claim.kind), claim, spec)))
    order = {r.name: i for i, r in enumerate(spec.roles)}
    seq = {ins: i for i, ins in enumerate(b.items)}
    items = sorted(b.items, key=lambda x: (order[x.role], x.index, seq[x]))
    return InstrumentedSpec(spec, tuple(items), tuple(formulas), tuple(b.report.diagnostics))


def _available_events(ispec: InstrumentedSpec) -> set[tuple[str, int]]:
    out = {(ins.event.label, len(ins.event.args)) for ins in ispec.inserted_events}
    for r in ispec.base.roles:
        out |= {(s.label, len(s.args)) for s in r.steps if isinstance(s, Event)}
    return out


def check_instrumentation(ispec: InstrumentedSpec) -> ValidationReport:
    report = ValidationReport()
    base = ispec.base
    available = _available_events(ispec)
    for ins in ispec.inserted_events:
        r = base.role(ins.role)
        if r is None:
            report.add(f"inserted event {ins.event.label} targets unknown role {ins.role}")
            continue
        if not 0 <= ins.index <= len(r.steps):
            report.add(f"inserted event {ins.event.label} has index {ins.index} outside role {r.name}")
            continue
        bound = set(bound_before(r, ins.index))
        for a in ins.event.args:
            for v in sorted(variables(a) - bound):
                report.add(f"inserted event {ins.event.label} in role {r.name} uses {v} before it is bound")
    for claim, cf in ispec.claim_formulas:
        if cf.formula is None:
            continue
        for label, arity in cf.labels:
            if tx.base_label(label) in ENGINE_LABELS:
                continue
            if (label, arity) not in available:
                report.add(f"{claim.kind.keyword} claim needs event {label}/{arity} but none is placed", claim.span)
    return report
