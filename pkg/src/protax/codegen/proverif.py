"""ProVerif model emission."""

from __future__ import annotations

import itertools

from .. import taxonomy as tx
from ..instrument import InstrumentedSpec
from ..ir import IDENTITY, LTK, PK, VALUE, Event, Fresh, Let, Recv, RoleScript, Send
from ..terms import App, Name, Term, Var, contains_fn, match, substitute
from .common import (
    PROVERIF, Doc, EmittedModel, EventNames, Provenance, UnsupportedForDialect, event_arities,
    model_name, query_name, term_vars,
)

HONEST = ("alice", "bob")
CHANNEL = "net"

RESERVED = frozenset("""
among axiom channel choice clauses const def diff do elimtrue else equation equivalence event
expand fail false forall free fun get if implementation in inj-event insert lemma let letfun
letproc new noninterf not nounif or otherwise out param phase pred proba process proof
public_vars putbegin query reduc restriction secret set suchthat sync table then true type
weaksecret yield time bitstring bool attacker mess
""".split())


def ident(name: str) -> str:
    out = name.replace(".", "_").replace("~", "v")
    return out + "_" if out in RESERVED else out


def term(t: Term) -> str:
    if isinstance(t, Var):
        return ident(t.id)
    if isinstance(t, Name):
        return ident(t.id)
    if not t.args:
        return ident(t.fn)
    return f"{ident(t.fn)}({', '.join(term(a) for a in t.args)})"


class _Emitter:
    def __init__(self, ispec: InstrumentedSpec):
        self.ispec = ispec
        self.spec = ispec.base
        self.theory = self.spec.full_theory()
        self.sig = self.spec.full_signature()
        self.destructors = frozenset(self.theory.destructors)
        self.events = EventNames(event_arities(ispec))
        self.claims = list(ispec.claim_formulas)
        self.leaves = {c.kind.leaf for c, _ in self.claims}
        self.reveal = bool(self.leaves & {"ForwardSecrecy", "PostCompromiseSecurity"})
        self.unlink = [(i, c, cf) for i, (c, cf) in enumerate(self.claims) if cf.formula is None]
        self.trace_ids = {}  # claim index -> recipe with destructors, checked through an auxiliary event
        for i, (c, cf) in enumerate(self.claims):
            if c.kind.leaf == "Traceability" and contains_fn(c.args["recipe"], self.destructors):
                self.trace_ids[i] = c.args["recipe"]
        self.doc = Doc()
        self.provenance: list[Provenance] = []
        self._tmp = itertools.count(1)

    # -- declarations --------------------------------------------------------------------
    def header(self):
        d = self.doc
        d.add(f"(* {self.spec.name}: generated ProVerif model *)", "")
        d.add(f"free {CHANNEL}: channel.", "")
        d.add("(* honest principals *)")
        d.add(f"free {', '.join(HONEST)}: bitstring.", "")
        d.add("(* signature *)")
        for f in sorted(self.sig, key=lambda f: f.name):
            if f.name in self.destructors:
                continue
            if f.arity == 0:
                d.add(f"const {ident(f.name)}: bitstring.")
            else:
                d.add(f"fun {ident(f.name)}({', '.join(['bitstring'] * f.arity)}): bitstring.")
        d.blank()
        d.add("(* rewrite rules *)")
        for fn in sorted(self.destructors):
            rules = self.theory.rules_for(fn)
            parts = []
            for r in rules:
                vs = term_vars(r.lhs)
                binder = ", ".join(f"{ident(v)}: bitstring" for v in vs)
                parts.append(f"forall {binder};\n    {term(r.lhs)} = {term(r.rhs)}")
            d.add("reduc " + "\n  otherwise ".join(parts) + ".")
        d.blank()
        d.add("(* events *)")
        names = self.events.declared()
        for i in sorted(self.trace_ids):
            names.append((f"TraceId_{i}", 2))
        if self.reveal and (self.events("Leaked", 1), 1) not in names:
            names.append((self.events("Leaked", 1), 1))
        for name, arity in sorted(names):
            d.add(f"event {ident(name)}({', '.join(['bitstring'] * arity)}).")
        d.blank()
        d.add("table keys(bitstring, bitstring).", "")

    # -- queries ---------------------------------------------------------------------------
    def queries(self):
        d = self.doc
        d.add("(* queries *)")
        for i, (claim, cf) in enumerate(self.claims):
            if cf.formula is None:
                continue
            name = query_name(i, claim.kind)
            lines = [f"(* {name} *)", self.query(i, claim, cf)]
            rng = d.add(*lines)
            self.provenance.append(Provenance(i, claim.kind.keyword, PROVERIF, name, rng))
        d.blank()

    def _ev(self, a: tx.EventAtom, inj=False, at=False) -> str:
        kw = "inj-event" if inj else "event"
        s = f"{kw}({ident(self.events(a.label, len(a.args)))}({', '.join(term(x) for x in a.args)}))"
        return s + (f"@{ident(a.time)}" if at else "")

    def query(self, i, claim, cf) -> str:
        f = cf.formula
        leaf = claim.kind.leaf
        if leaf == "Secrecy":
            x = claim.args["term"]
            role = self.spec.role(claim.args["role"].role)
            if isinstance(x, Var) and any(isinstance(s, Fresh) and s.var == x.id for s in role.steps):
                return f"query attacker(new {ident(x.id)})."
        if leaf == "Traceability" and i in self.trace_ids:
            return f"query a: bitstring, x: bitstring; event(TraceId_{i}(a, x)) ==> x = a."
        temporal = leaf == "PostCompromiseSecurity"
        inj = leaf == "InjectiveAgreement"
        prem = []
        for a in f.premises:
            if isinstance(a, tx.EventAtom):
                prem.append(self._ev(a, inj=inj, at=temporal))
            else:
                prem.append(f"attacker({term(a.term)})")
        concl = []
        for a in f.conclusions:
            concl.append(self._ev(a, inj=inj, at=temporal))
        for c in f.constraints:
            if isinstance(c, tx.NotKnown):
                prem.append(f"attacker({term(c.term)})")
            elif isinstance(c, tx.Eq):
                concl.append(f"{term(c.left)} = {term(c.right)}")
            elif isinstance(c, tx.Before) and temporal:
                concl.append(f"{ident(c.earlier)} < {ident(c.later)}")
            # injective ordering and uniqueness come from inj-event
        tvars = []
        for v in self._formula_vars(f):
            tvars.append(f"{ident(v)}: bitstring")
        if temporal:
            times = sorted({a.time for a in f.premises + f.conclusions if isinstance(a, tx.EventAtom)})
            tvars += [f"{ident(t)}: time" for t in times]
        head = f"query {', '.join(tvars)};" if tvars else "query"
        rhs = " && ".join(concl) if concl else "false"
        return f"{head} {' && '.join(prem)} ==> {rhs}."

    def _formula_vars(self, f) -> list[str]:
        out: list[str] = []
        atoms = list(f.premises) + list(f.conclusions)
        for a in atoms:
            ts = a.args if isinstance(a, tx.EventAtom) else (a.term,)
            for t in ts:
                for v in term_vars(t):
                    if v not in out:
                        out.append(v)
        for c in list(f.constraints):
            for t in ((c.left, c.right) if isinstance(c, tx.Eq) else (c.term,) if isinstance(c, tx.NotKnown) else ()):
                for v in term_vars(t):
                    if v not in out:
                        out.append(v)
        return out

    # -- role processes ----------------------------------------------------------------------
    def role_process(self, role: RoleScript):
        steps = self.ispec.role_steps(role.name)
        ids = [p for p in role.params if p.kind == IDENTITY]
        me = ids[0].name if ids else None
        args = []
        if me:
            args.append(me)
        for p in role.params:
            if p.kind == LTK:
                if p.owner != me:
                    raise UnsupportedForDialect(f"role {role.name}: long-term key of a peer ({p.name})")
                args.append(p.name)
            elif p.kind == VALUE:
                args.append(p.name)
        body: list[str] = []
        for p in ids[1:]:
            body.append(f"in({CHANNEL}, {ident(p.name)}: bitstring);")
        for p in role.params:
            if p.kind == PK:
                if p.owner == me:
                    sk = next(q.name for q in role.params if q.kind == LTK and q.owner == me)
                    body.append(f"let {ident(p.name)}: bitstring = pk({ident(sk)}) in")
                else:
                    body.append(f"get keys(={ident(p.owner)}, {ident(p.name)}) in")
        bound = {p.name for p in role.params}
        pcs = self._pcs_hooks(role)
        body.extend(pcs.get(-1, ()))
        for idx, s in enumerate(steps):
            if isinstance(s, Fresh):
                body.append(f"new {ident(s.var)}: bitstring;")
                bound.add(s.var)
            elif isinstance(s, Send):
                body.append(f"out({CHANNEL}, {term(s.term)});")
            elif isinstance(s, Let):
                body.append(f"let {ident(s.var)}: bitstring = {term(s.term)} in")
                bound.add(s.var)
            elif isinstance(s, Event):
                body.append(f"event {ident(self.events(s.label, len(s.args)))}({', '.join(term(a) for a in s.args)});")
                for i, recipe in self.trace_ids.items():
                    if s.label == "SendMsg" and len(s.args) == 2:
                        probe = substitute(recipe, {tx.RECIPE_VAR: s.args[1]})
                        tmp = f"tid_{next(self._tmp)}"
                        body.append(f"(let {tmp}: bitstring = {term(probe)} in event TraceId_{i}({term(s.args[0])}, {tmp})) |")
            elif isinstance(s, Recv):
                x = f"msg_{next(self._tmp)}"
                body.append(f"in({CHANNEL}, {x}: bitstring);")
                body.extend(self.match_lines(s.pattern, Var(x), bound))
            for hook in pcs.get(idx, ()):
                body.append(hook)
        body.append("0.")
        params = ", ".join(f"{ident(a)}: bitstring" for a in args)
        self.doc.add(f"let {ident(role.name)}({params}) =")
        self.doc.add(*("  " + line for line in body))
        self.doc.blank()

    def _pcs_hooks(self, role: RoleScript) -> dict[int, list[str]]:
        # a compromise branch at the first step where the claimed state is bound
        out: dict[int, list[str]] = {}
        for claim, _ in self.claims:
            if claim.kind.leaf != "PostCompromiseSecurity" or claim.args["sender"].role != role.name:
                continue
            a, b = claim.args["sender"].vars
            sid = claim.args["sid"]
            state = list(claim.args["state"])
            need = set(term_vars(sid)) | {a, b}
            for t in state:
                need |= set(term_vars(t))
            steps = self.ispec.role_steps(role.name)
            idx = max((binding_index_steps(role, steps, v) for v in need), default=-1)
            leak = ", ".join(term(t) for t in state) if len(state) != 1 else term(state[0])
            if len(state) > 1:
                leak = f"({leak})"
            ev = f"{ident(self.events('Compromise', 3))}({term(sid)}, {ident(a)}, {ident(b)})"
            out.setdefault(idx, []).append(f"(event {ev}; out({CHANNEL}, {leak})) |")
        return out

    def match_lines(self, p: Term, e: Term, bound: set) -> list[str]:
        """Destructor lets and equality tests that accept exactly the instances of ``p``."""
        lines: list[str] = []
        if isinstance(p, Var) and p.id not in bound:
            bound.add(p.id)
            return [f"let {ident(p.id)}: bitstring = {term(e)} in"]
        if all(v in bound for v in term_vars(p)):
            return [f"if {term(e)} = {term(p)} then"]
        progress = True
        while progress and not all(v in bound for v in term_vars(p)):
            progress = False
            for rule in self.theory.rules:
                first = rule.lhs.args[0]
                if not (isinstance(first, App) and isinstance(p, App) and first.fn == p.fn):
                    continue
                th = match(first, p)
                if th is None:
                    continue
                part = substitute(rule.rhs, th)
                if all(v in bound for v in term_vars(part)):
                    continue
                others = [substitute(a, th) for a in rule.lhs.args[1:]]
                if any(v not in bound for o in others for v in term_vars(o)):
                    continue
                tmp = f"x_{next(self._tmp)}"
                call = App(rule.lhs.fn, (e,) + tuple(others))
                lines.append(f"let {tmp}: bitstring = {term(call)} in")
                lines.extend(self.match_lines(part, Var(tmp), bound))
                progress = True
                break
        if not all(v in bound for v in term_vars(p)):
            raise UnsupportedForDialect(f"cannot decompose received pattern {term(p)}")
        lines.append(f"if {term(e)} = {term(p)} then")
        return lines

    # -- main process ----------------------------------------------------------------------
    def main(self):
        d = self.doc
        unlink_roles = {cf.role: (i, cf.subject) for i, _, cf in self.unlink}
        lines = []
        for h in HONEST:
            lines.append(f"new sk_{h}: bitstring;")
        values = sorted({(p.name, r.name) for r in self.spec.roles for p in r.params if p.kind == VALUE})
        for h in HONEST:
            for v in sorted({n for n, _ in values}):
                lines.append(f"new {ident(v)}_{h}: bitstring;")
        for h in HONEST:
            lines.append(f"insert keys({h}, pk(sk_{h}));")
        for h in HONEST:
            lines.append(f"out({CHANNEL}, pk(sk_{h}));")
        d.add("process")
        d.add(*("  " + line for line in lines))
        d.add("  (")
        d.add(f"    (!in({CHANNEL}, (x: bitstring, k: bitstring)); if x <> {HONEST[0]} && x <> {HONEST[1]} then insert keys(x, k))")
        for role in self.spec.roles:
            ids = [p for p in role.params if p.kind == IDENTITY]
            for h in HONEST if ids else HONEST[:1]:
                args = [h] if ids else []
                for p in role.params:
                    if p.kind == LTK:
                        args.append(f"sk_{h}")
                    elif p.kind == VALUE:
                        args.append(f"{ident(p.name)}_{h}")
                if role.name in unlink_roles:
                    i, subject = unlink_roles[role.name]
                    left = [a if not a.startswith(ident(subject) + "_") else "s" for a in args]
                    right = [a if not a.startswith(ident(subject) + "_") else "choice[s, t]" for a in args]
                    rng = d.add(f"  | (* unlinkability_{i}: P(s) | P(s) ~ P(s) | P(t) *)",
                                f"    !(new s: bitstring; new t: bitstring; ({ident(role.name)}({', '.join(left)}) | {ident(role.name)}({', '.join(right)})))")
                    self._unlink_rng[i] = rng
                    break
                d.add(f"  | !{ident(role.name)}({', '.join(args)})")
        if self.reveal:
            ev = ident(self.events("Leaked", 1))
            for h in HONEST:
                d.add(f"  | (phase 1; event {ev}(sk_{h}); out({CHANNEL}, sk_{h}))")
        d.add("  )")

    def run(self) -> EmittedModel:
        self._unlink_rng: dict[int, tuple[int, int]] = {}
        self.header()
        self.queries()
        d = self.doc
        d.add("(* roles *)")
        for role in self.spec.roles:
            self.role_process(role)
        self.main()
        for i, claim, _ in self.unlink:
            rng = self._unlink_rng.get(i)
            if rng is not None:
                self.provenance.append(Provenance(i, claim.kind.keyword, PROVERIF, None, rng))
        prov = tuple(sorted(self.provenance, key=lambda p: p.claim))
        return EmittedModel(PROVERIF, model_name(self.spec.name), d.text(), prov)


def binding_index_steps(role: RoleScript, steps, var: str) -> int:
    """Index in ``steps`` after which ``var`` is bound (-1 for parameters)."""
    if role.param(var) is not None:
        return -1
    for i, s in enumerate(steps):
        if isinstance(s, (Fresh, Let)) and s.var == var:
            return i
        if isinstance(s, Recv) and var in term_vars(s.pattern):
            return i
    return len(steps) - 1


def emit_proverif(ispec: InstrumentedSpec) -> EmittedModel:
    return _Emitter(ispec).run()
