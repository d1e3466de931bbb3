"""Protocol specifications: role scripts, claims, and structural validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from . import taxonomy as tx
from .diagnostics import SourceSpan, ValidationReport
from .terms import (
    BUILTIN_NAMES, CONSTANT, CONSTRUCTOR, DESTRUCTOR, DEFAULT_SIGNATURE, DEFAULT_THEORY,
    App, FunctionSpec, Name, RewriteRule, Signature, Term, Theory, Var, is_subterm_convergent,
    subterms, term_key, variables,
)

IDENTITY = "identity"
LTK = "ltk"
PK = "pk"
VALUE = "value"
PARAM_KINDS = (IDENTITY, LTK, PK, VALUE)

_NOSPAN = dict(default=None, compare=False, hash=False, repr=False)


@dataclass(frozen=True)
class Param:
    name: str
    kind: str
    owner: str | None = None  # identity parameter a key belongs to
    span: SourceSpan | None = field(**_NOSPAN)


@dataclass(frozen=True)
class Fresh:
    var: str
    span: SourceSpan | None = field(**_NOSPAN)


@dataclass(frozen=True)
class Send:
    term: Term
    span: SourceSpan | None = field(**_NOSPAN)


@dataclass(frozen=True)
class Recv:
    pattern: Term
    span: SourceSpan | None = field(**_NOSPAN)


@dataclass(frozen=True)
class Let:
    var: str
    term: Term
    span: SourceSpan | None = field(**_NOSPAN)


@dataclass(frozen=True)
class Event:
    label: str
    args: tuple = ()
    span: SourceSpan | None = field(**_NOSPAN)


Step = Union[Fresh, Send, Recv, Let, Event]


@dataclass(frozen=True)
class RoleScript:
    name: str
    params: tuple = ()
    steps: tuple = ()
    span: SourceSpan | None = field(**_NOSPAN)

    def param(self, name: str) -> Param | None:
        for p in self.params:
            if p.name == name:
                return p
        return None

    @property
    def identity_params(self) -> list[Param]:
        return [p for p in self.params if p.kind == IDENTITY]


@dataclass(frozen=True)
class RoleRef:
    role: str
    vars: tuple = ()
    span: SourceSpan | None = field(**_NOSPAN)

    def __str__(self) -> str:
        return f"{self.role}[{', '.join(self.vars)}]" if self.vars else self.role


@dataclass(frozen=True)
class PropertyClaim:
    kind: tx.PropertyKind
    args: dict = field(default_factory=dict)
    span: SourceSpan | None = field(**_NOSPAN)

    # views matching the formula-oriented description of a claim
    @property
    def role_bindings(self) -> dict[str, RoleRef]:
        return {k: v for k, v in self.args.items() if isinstance(v, RoleRef)}

    @property
    def subject_terms(self) -> list[Term]:
        return [v for v in self.args.values() if isinstance(v, (Var, App, Name))]

    @property
    def options(self) -> dict:
        return {k: v for k, v in self.args.items() if isinstance(v, tuple)}

    def __hash__(self):
        return hash((self.kind, tuple(sorted(self.args))))


def _fn_key(f: FunctionSpec):
    return f.name


def _rule_key(r: RewriteRule):
    return (term_key(r.lhs), term_key(r.rhs))


@dataclass(frozen=True)
class ProtocolSpec:
    """The compiler input. Signature and theory hold user declarations only (builtins are implicit)."""

    name: str
    signature: tuple = ()
    theory: tuple = ()
    roles: tuple = ()
    claims: tuple = ()
    channel: str = "public"
    span: SourceSpan | None = field(**_NOSPAN)

    def __post_init__(self):
        object.__setattr__(self, "signature", tuple(sorted(self.signature, key=_fn_key)))
        object.__setattr__(self, "theory", tuple(sorted(self.theory, key=_rule_key)))
        object.__setattr__(self, "roles", tuple(self.roles))
        object.__setattr__(self, "claims", tuple(self.claims))

    def __hash__(self):
        return hash((self.name, self.signature, self.theory, self.roles))

    def role(self, name: str) -> RoleScript | None:
        for r in self.roles:
            if r.name == name:
                return r
        return None

    def full_signature(self) -> Signature:
        return Signature(_classify(list(DEFAULT_SIGNATURE) + list(self.signature), self.theory))

    def full_theory(self) -> Theory:
        return Theory(list(DEFAULT_THEORY) + list(self.theory))


def _classify(fns: list[FunctionSpec], rules) -> list[FunctionSpec]:
    heads = {r.lhs.fn for r in rules}
    out = []
    for f in fns:
        if f.name in heads and f.kind != DESTRUCTOR:
            f = FunctionSpec(f.name, f.arity, DESTRUCTOR)
        out.append(f)
    return out


def user_function(name: str, arity: int, rules=()) -> FunctionSpec:
    if any(r.lhs.fn == name for r in rules):
        return FunctionSpec(name, arity, DESTRUCTOR)
    return FunctionSpec(name, arity, CONSTANT if arity == 0 else CONSTRUCTOR)


# -- binding analysis -------------------------------------------------------------


def bound_before(role: RoleScript, index: int) -> list[str]:
    """Variables bound by params and by steps strictly before ``index`` (in binding order)."""
    out = [p.name for p in role.params]
    for s in role.steps[:index]:
        for v in step_binds(s, out):
            out.append(v)
    return out


def step_binds(step: Step, bound) -> list[str]:
    if isinstance(step, Fresh):
        return [step.var]
    if isinstance(step, Let):
        return [step.var]
    if isinstance(step, Recv):
        seen = []
        for v in _vars_in_order(step.pattern):
            if v not in bound and v not in seen:
                seen.append(v)
        return seen
    return []


def _vars_in_order(t: Term) -> list[str]:
    out = []
    for s in subterms(t):
        if isinstance(s, Var):
            out.append(s.id)
    return out


def step_terms(step: Step) -> list[Term]:
    if isinstance(step, (Send,)):
        return [step.term]
    if isinstance(step, Let):
        return [step.term]
    if isinstance(step, Recv):
        return [step.pattern]
    if isinstance(step, Event):
        return list(step.args)
    return []


def binding_index(role: RoleScript, var: str) -> int | None:
    """Index of the step after which ``var`` is bound; -1 for parameters."""
    if role.param(var) is not None:
        return -1
    bound = [p.name for p in role.params]
    for i, s in enumerate(role.steps):
        new = step_binds(s, bound)
        if var in new:
            return i
        bound.extend(new)
    return None


def all_role_vars(role: RoleScript) -> list[str]:
    return bound_before(role, len(role.steps))


# -- validation ---------------------------------------------------------------------


def _span_of(*objs):
    for o in objs:
        sp = getattr(o, "span", None)
        if sp is not None:
            return sp
    return None


def _check_term(t: Term, sig: Signature, report: ValidationReport, where, allowed_vars=None, ctx=None):
    for s in subterms(t):
        if isinstance(s, App):
            f = sig.get(s.fn)
            if f is None:
                report.add(f"unknown function {s.fn}/{len(s.args)}", _span_of(s, where))
            elif f.arity != len(s.args):
                report.add(f"function {s.fn} expects {f.arity} argument(s), got {len(s.args)}", _span_of(s, where))
        elif isinstance(s, Var) and allowed_vars is not None and s.id not in allowed_vars:
            report.add(f"unbound identifier {s.id}" + (f" in {ctx}" if ctx else ""), _span_of(s, where))


def validate_theory(spec: ProtocolSpec, report: ValidationReport) -> None:
    sig = spec.full_signature()
    for f in spec.signature:
        if f.name in BUILTIN_NAMES:
            report.add(f"function {f.name} is already built in", f.span if hasattr(f, "span") else None)
    names = [f.name for f in spec.signature]
    for n in sorted({n for n in names if names.count(n) > 1}):
        report.add(f"duplicate function {n}")
    for r in spec.theory:
        _check_term(r.lhs, sig, report, r)
        _check_term(r.rhs, sig, report, r)
        if r.lhs.fn in BUILTIN_NAMES:
            report.add(f"equation redefines built-in function {r.lhs.fn}")
        if not is_subterm_convergent(r):
            report.add(
                f"equation {r} is not subterm-convergent; algebraic theories (DH/XOR) are only "
                "available as pass-through annotations in generated models"
            )
            continue
        if not r.lhs.args:
            report.add(f"equation {r} has a constant left-hand side")
            continue
        heads = {x.lhs.fn for x in spec.theory}
        for a in r.lhs.args:
            for s in subterms(a):
                if isinstance(s, App) and s.fn in heads | {x.lhs.fn for x in DEFAULT_THEORY}:
                    report.add(f"equation {r} nests a destructor inside its left-hand side")
        if not variables(r.lhs) <= variables(r.lhs.args[0]):
            report.add(f"equation {r}: the first argument must bind every rule variable")


def validate_role(role: RoleScript, sig: Signature, report: ValidationReport) -> None:
    seen_params = []
    for p in role.params:
        if p.name in seen_params:
            report.add(f"duplicate parameter {p.name} in role {role.name}", _span_of(p, role))
        if p.kind not in PARAM_KINDS:
            report.add(f"unknown parameter kind {p.kind}", _span_of(p, role))
        if p.kind in (LTK, PK):
            owner = role.param(p.owner) if p.owner else None
            if owner is None or owner.kind != IDENTITY or p.owner not in seen_params:
                report.add(
                    f"key parameter {p.name} must name an earlier identity parameter", _span_of(p, role)
                )
        seen_params.append(p.name)
    bound = list(seen_params)
    destructors = sig.destructors()
    for step in role.steps:
        ctx = f"role {role.name}"
        if isinstance(step, Fresh):
            if step.var in bound:
                report.add(f"fresh {step.var} rebinds an existing identifier", step.span)
            bound.append(step.var)
        elif isinstance(step, Let):
            _check_term(step.term, sig, report, step, bound, ctx)
            if step.var in bound:
                report.add(f"let {step.var} rebinds an existing identifier", step.span)
            bound.append(step.var)
        elif isinstance(step, Send):
            _check_term(step.term, sig, report, step, bound, ctx)
        elif isinstance(step, Event):
            for a in step.args:
                _check_term(a, sig, report, step, bound, ctx)
        elif isinstance(step, Recv):
            _check_term(step.pattern, sig, report, step, None)
            occurrences = [v for v in _vars_in_order(step.pattern) if v not in bound]
            for v in sorted({v for v in occurrences if occurrences.count(v) > 1}):
                report.add(f"recv pattern binds {v} more than once", step.span)
            for s in subterms(step.pattern):
                if isinstance(s, App) and s.fn in destructors:
                    report.add(f"recv pattern uses destructor {s.fn}", _span_of(s, step))
            bound.extend(dict.fromkeys(occurrences))


def validate_claim(claim: PropertyClaim, spec: ProtocolSpec, sig: Signature, report: ValidationReport) -> None:
    sp = claim.span
    if not claim.kind.is_leaf:
        report.add(tx.category_message(claim.kind.category), sp)
        return
    schema = {a.name: a for a in tx.claim_schema(claim.kind)}
    for k in claim.args:
        if k not in schema:
            report.add(f"{claim.kind.keyword} does not take argument '{k}'", sp)
    for a in schema.values():
        if a.required and a.name not in claim.args:
            report.add(f"{claim.kind.keyword} requires argument '{a.name}'", sp)
    roles_in_claim: list[RoleScript] = []
    for name, a in schema.items():
        v = claim.args.get(name)
        if v is None:
            continue
        if a.kind == "role":
            if not isinstance(v, RoleRef):
                report.add(f"argument '{name}' must be a role reference", sp)
                continue
            role = spec.role(v.role)
            if role is None:
                report.add(f"unknown role {v.role}", _span_of(v, claim))
                continue
            roles_in_claim.append(role)
            if len(v.vars) != a.role_vars:
                report.add(f"argument '{name}' expects {a.role_vars} identifier(s) in brackets", _span_of(v, claim))
            rv = set(all_role_vars(role))
            for x in v.vars:
                if x not in rv:
                    report.add(f"unbound identifier {x} in role {role.name}", _span_of(v, claim))
        elif a.kind == "var" and not isinstance(v, Var):
            report.add(f"argument '{name}' must be an identifier", sp)
        elif a.kind == "list" and not isinstance(v, tuple):
            report.add(f"argument '{name}' must be a list", sp)
        elif a.kind == "term" and isinstance(v, (RoleRef, tuple)):
            report.add(f"argument '{name}' must be a term", sp)
    if not report.ok:
        return
    leaf = claim.kind.leaf
    args = claim.args

    def need_vars(term_or_list, role, what):
        terms = term_or_list if isinstance(term_or_list, tuple) else (term_or_list,)
        rv = set(all_role_vars(role))
        for t in terms:
            _check_term(t, sig, report, claim, None)
            for x in sorted(variables(t)):
                if x not in rv:
                    report.add(f"{what}: unbound identifier {x} in role {role.name}", _span_of(t, claim))

    if leaf in tx.AUTH_CHAIN:
        for side in ("initiator", "responder"):
            need_vars(args["data"], spec.role(args[side].role), "data")
        if args["initiator"].role == args["responder"].role:
            report.add("initiator and responder must be different roles", sp)
    elif leaf in ("Secrecy", "ForwardSecrecy"):
        need_vars(args["term" if leaf == "Secrecy" else "key"], spec.role(args["role"].role), leaf.lower())
    elif leaf == "PostCompromiseSecurity":
        r = spec.role(args["sender"].role)
        need_vars((args["sid"], args["key"], args["heal_after"]) + tuple(args["state"]), r, "post_compromise_security")
    elif leaf == "Anonymity":
        need_vars(args["id"], spec.role(args["role"].role), "anonymity")
    elif leaf == "Unlinkability":
        r = spec.role(args["role"].role)
        p = r.param(args["subject"].id)
        if p is None or p.kind != VALUE:
            report.add(f"unlinkability subject must be a value parameter of role {r.name}", sp)
    elif leaf == "Traceability":
        need_vars(args["message"], spec.role(args["sender"].role), "traceability")
        _check_term(args["recipe"], sig, report, claim, {tx.RECIPE_VAR}, "recipe")
    elif leaf == "NonRepudiation":
        for side in ("sender", "receiver"):
            need_vars(args["message"], spec.role(args[side].role), "non_repudiation")


def validate_spec(spec: ProtocolSpec) -> ValidationReport:
    report = ValidationReport()
    validate_theory(spec, report)
    sig = spec.full_signature()
    if not spec.roles:
        report.add("protocol declares no roles", spec.span)
    names = [r.name for r in spec.roles]
    for r in spec.roles:
        if names.count(r.name) > 1:
            report.add(f"duplicate role {r.name}", r.span)
            names = [n for n in names if n != r.name]
        validate_role(r, sig, report)
    if not report.ok:
        # claim checks assume well-formed roles
        for c in spec.claims:
            if not c.kind.is_leaf:
                report.add(tx.category_message(c.kind.category), c.span)
        return report
    for c in spec.claims:
        validate_claim(c, spec, sig, report)
    return report
