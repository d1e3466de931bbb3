"""Tamarin model emission."""

from __future__ import annotations

from .. import taxonomy as tx
from ..engine.explore import narrow_block
from ..instrument import InstrumentedSpec
from ..ir import IDENTITY, LTK, PK, VALUE, Event, Fresh, Let, Recv, RoleScript, Send
from ..terms import App, Name, Term, Var, substitute
from .common import (
    TAMARIN, Doc, EmittedModel, EventNames, Provenance, UnsupportedForDialect, event_arities,
    formula_times, model_name, query_name, term_vars,
)

BUILTIN_PAIRING = {"pair", "fst", "snd"}
RESERVED_FUNCTIONS = frozenset({"true", "false", "in", "let", "rule", "lemma", "diff", "not", "h"})
RESERVED_FACTS = frozenset({"Fr", "In", "Out", "K", "KU", "KD"})


def fn_name(name: str) -> str:
    return name + "_" if name in RESERVED_FUNCTIONS else name


def fact_name(label: str) -> str:
    out = label[:1].upper() + label[1:]
    return out + "_" if out in RESERVED_FACTS else out


def _var_name(v: str) -> str:
    if v.startswith("~"):
        n, _, base = v[1:].partition(".")
        return f"r{n}_{base}"
    return v.replace(".", "_")


class Renderer:
    """Terms in Tamarin syntax; role variables carry their sort prefix."""

    def __init__(self, sorts: dict[str, str] | None = None):
        self.sorts = sorts or {}

    def __call__(self, t: Term) -> str:
        if isinstance(t, Var):
            return self.sorts.get(t.id, "") + _var_name(t.id)
        if isinstance(t, Name):
            return f"'{t.id}'"
        if t.fn == "pair" and len(t.args) == 2:
            return f"<{self(t.args[0])}, {self(t.args[1])}>"
        if not t.args:
            return fn_name(t.fn)
        return f"{fn_name(t.fn)}({', '.join(self(a) for a in t.args)})"


class _Emitter:
    def __init__(self, ispec: InstrumentedSpec):
        self.ispec = ispec
        self.spec = ispec.base
        self.theory = self.spec.full_theory()
        self.sig = self.spec.full_signature()
        self.destructors = frozenset(self.theory.destructors)
        self.events = EventNames(event_arities(ispec), fact_name)
        self.claims = list(ispec.claim_formulas)
        self.leaves = {c.kind.leaf for c, _ in self.claims}
        self.reveal = bool(self.leaves & {"ForwardSecrecy", "PostCompromiseSecurity"})
        self.unlink = {cf.role: (i, cf.subject) for i, (c, cf) in enumerate(self.claims) if cf.formula is None}
        self.doc = Doc()
        self.provenance: list[Provenance] = []
        self.fn_names = {fn_name(f.name) for f in self.sig}

    # -- header ------------------------------------------------------------------------------
    def header(self):
        d = self.doc
        name = model_name(self.spec.name)
        d.add(f"theory {name}", "begin", "")
        fns = sorted(f"{fn_name(f.name)}/{f.arity}" for f in self.sig if f.name not in BUILTIN_PAIRING)
        d.add("functions:")
        d.add(*(f"  {f}{',' if k < len(fns) - 1 else ''}" for k, f in enumerate(fns)))
        d.blank()
        rules = [r for r in self.theory.rules if r.lhs.fn not in BUILTIN_PAIRING]
        if rules:
            r = Renderer()
            d.add("equations:")
            rendered = sorted(f"{r(x.lhs)} = {r(x.rhs)}" for x in rules)
            d.add(*(f"  {e}{',' if k < len(rendered) - 1 else ''}" for k, e in enumerate(rendered)))
            d.blank()

    def setup_rules(self):
        d = self.doc
        d.add("rule Register_pk:", "  [ Fr(~ltk) ]", "  -->", "  [ !Ltk($A, ~ltk), !Pk($A, pk(~ltk)), Out(pk(~ltk)) ]", "")
        values = sorted({p.name for r in self.spec.roles for p in r.params if p.kind == VALUE})
        for v in values:
            d.add(f"rule Value_{v}:", "  [ Fr(~v) ]", "  -->", f"  [ !Value_{v}($A, ~v) ]", "")
        if self.reveal:
            leaked = self.events("Leaked", 1)
            d.add("rule Reveal_ltk:", "  [ !Ltk(A, ltk) ]", f"  --[ {leaked}(ltk) ]->", "  [ Out(ltk) ]", "")
        for role, (i, subject) in sorted(self.unlink.items()):
            rng = d.add(
                f"// unlinkability_{i}: P(s) | P(s) ~ P(s) | P(t)",
                f"rule Unlink_{role}:",
                "  [ Fr(~s), Fr(~t) ]",
                "  -->",
                f"  [ Session_{role}(~s), Session_{role}(diff(~s, ~t)) ]",
            )
            d.add("")
            self.provenance.append(Provenance(i, "unlinkability", TAMARIN, None, rng))

    # -- roles ----------------------------------------------------------------------------------
    def role_rules(self, role: RoleScript):
        steps = self.ispec.role_steps(role.name)
        ids = [p.name for p in role.params if p.kind == IDENTITY]
        sorts: dict[str, str] = {v: "$" for v in ids}
        for s in steps:
            if isinstance(s, Fresh):
                sorts[s.var] = "~"
        sorts["tid"] = "~"
        rend = Renderer(sorts)
        recv_at = [i for i, s in enumerate(steps) if isinstance(s, Recv)]
        starts = [0] + [i for i in recv_at if i > 0]
        bound: list[str] = []  # carried in the state fact, in binding order
        for b, start in enumerate(starts):
            end = next((i for i in recv_at if i > start), len(steps))
            if b == 0:
                bound = ["tid"] + [p.name for p in role.params]
            for branch, (pat, env) in enumerate(self._branches(steps, start, end, bound, sorts)):
                prem = self._setup_premises(role, ids, env, rend) if b == 0 else []
                if b > 0:
                    prem.insert(0, f"St_{role.name}_{b}({', '.join(rend(env.get(v, Var(v))) for v in bound)})")
                if pat is not None:
                    prem.append(f"In({rend(pat)})")
                actions: list[str] = []
                outs: list[str] = []
                new_bound = list(bound)
                if pat is not None:
                    for v in term_vars(steps[start].pattern):
                        if v not in new_bound:
                            new_bound.append(v)
                for s in steps[start + (1 if pat is not None else 0):end]:
                    if isinstance(s, Fresh):
                        prem.append(f"Fr(~{_var_name(s.var)})")
                        new_bound.append(s.var)
                    elif isinstance(s, Let):
                        new_bound.append(s.var)
                    elif isinstance(s, Send):
                        outs.append(f"Out({rend(self._value(s.term, env))})")
                    elif isinstance(s, Event):
                        args = ", ".join(rend(self._value(a, env)) for a in s.args)
                        actions.append(f"{self.events(s.label, len(s.args))}({args})")
                concl = list(outs)
                if b + 1 < len(starts):
                    concl.insert(0, f"St_{role.name}_{b + 1}({', '.join(rend(self._value(Var(v), env)) for v in new_bound)})")
                suffix = f"_{branch}" if branch else ""
                self.doc.add(f"rule {role.name}_{b}{suffix}:")
                self.doc.add(f"  [ {', '.join(prem)} ]")
                self.doc.add(f"  --[ {', '.join(actions)} ]->" if actions else "  -->")
                self.doc.add(f"  [ {', '.join(concl)} ]", "")
            if b + 1 < len(starts):
                self._compromise_rules(role, b + 1, new_bound, rend)
            bound = new_bound

    def _setup_premises(self, role, ids, env, rend) -> list[str]:
        unlink = self.unlink.get(role.name)
        val = lambda v: rend(env.get(v, Var(v)))
        out = ["Fr(~tid)"]
        for p in role.params:
            if p.kind == LTK:
                out.append(f"!Ltk({val(p.owner)}, {val(p.name)})")
            elif p.kind == PK:
                out.append(f"!Pk({val(p.owner)}, {val(p.name)})")
            elif p.kind == VALUE:
                if unlink is not None and unlink[1] == p.name:
                    out.append(f"Session_{role.name}({val(p.name)})")
                elif ids:
                    out.append(f"!Value_{p.name}({val(ids[0])}, {val(p.name)})")
                else:
                    raise UnsupportedForDialect(f"role {role.name}: value parameter without an owner")
        return out

    def _value(self, t: Term, env: dict) -> Term:
        return self.theory.normalize(substitute(t, env))

    def _branches(self, steps, start, end, bound, sorts):
        if not isinstance(steps[start], Recv):
            env = {}
            for s in steps[start:end]:
                if isinstance(s, Let):
                    env[s.var] = self.theory.normalize(substitute(s.term, env))
            return [(None, env)]
        env0 = {v: Var(v) for v in bound}
        out = []
        for pat, env in narrow_block(self.theory, steps, start, end, env0, lambda v: Var(v)):
            # sorted variables (fresh, public) cannot be instantiated by narrowing
            if any(sorts.get(v) and not isinstance(env.get(v, Var(v)), Var) for v in env):
                continue
            out.append((pat, env))
        if not out:
            raise UnsupportedForDialect(f"no executable instance of the block starting at step {start}")
        return out

    def _compromise_spec(self, role):
        for claim, _ in self.claims:
            if claim.kind.leaf == "PostCompromiseSecurity" and claim.args["sender"].role == role.name:
                yield claim

    def _compromise_rules(self, role, state_index, bound, rend):
        # a compromise rule reads the state fact once sid and the claimed state are bound
        for claim in self._compromise_spec(role):
            a, b = claim.args["sender"].vars
            sid = claim.args["sid"]
            state = list(claim.args["state"])
            need = set(term_vars(sid)) | {a, b} | {v for t in state for v in term_vars(t)}
            if not need <= set(bound):
                continue
            fact = f"St_{role.name}_{state_index}({', '.join(rend(Var(v)) for v in bound)})"
            ev = self.events("Compromise", 3)
            leak = rend(state[0]) if len(state) == 1 else "<" + ", ".join(rend(t) for t in state) + ">"
            self.doc.add(
                f"rule Compromise_{role.name}_{state_index}:",
                f"  [ {fact} ]",
                f"  --[ {ev}({rend(sid)}, {rend(Var(a))}, {rend(Var(b))}) ]->",
                f"  [ {fact}, Out({leak}) ]",
                "",
            )

    # -- lemmas -------------------------------------------------------------------------------------
    def lemmas(self):
        for i, (claim, cf) in enumerate(self.claims):
            if cf.formula is None:
                continue
            name = query_name(i, claim.kind)
            rng = self.doc.add(f"lemma {name}:", f'  "{self.formula(cf.formula)}"')
            self.doc.add("")
            self.provenance.append(Provenance(i, claim.kind.keyword, TAMARIN, name, rng))

    def _v(self, name: str) -> str:
        return name + "_v" if name in self.fn_names else name

    def _t(self, t: Term) -> str:
        ren = {v: Var(self._v(v)) for v in term_vars(t)}
        return Renderer()(substitute(t, ren))

    def _atom(self, a) -> str:
        if isinstance(a, tx.EventAtom):
            return f"{self.events(a.label, len(a.args))}({', '.join(self._t(x) for x in a.args)}) @ #{a.time}"
        return f"K({self._t(a.term)}) @ #{a.time}"

    def _con(self, c) -> str:
        if isinstance(c, tx.Before):
            return f"#{c.earlier} < #{c.later}"
        if isinstance(c, tx.NotEqual):
            return f"not (#{c.left} = #{c.right})"
        if isinstance(c, tx.Eq):
            return f"{self._t(c.left)} = {self._t(c.right)}"
        if isinstance(c, tx.NotKnown):
            return f"not (Ex #kt. K({self._t(c.term)}) @ #kt)"
        raise TypeError(c)

    def _binder(self, names, times) -> str:
        return " ".join(f"#{n}" if n in times else self._v(n) for n in names)

    def formula(self, f: tx.GuardedFormula) -> str:
        times = formula_times(f)
        untimed = [a for a in f.premises if isinstance(a, tx.KnowledgeAtom) and a.time is None]
        if untimed:
            raise UnsupportedForDialect("untimed knowledge premise")
        prem = " & ".join([self._atom(a) for a in f.premises] + [self._con(c) for c in f.guards])
        if f.outer_negation:
            return f"not (Ex {self._binder(f.universals, times)}. {prem})"
        concl = [self._atom(a) for a in f.conclusions] + [self._con(c) for c in f.constraints]
        nu = f.negated_uniqueness
        if nu is not None:
            inner = " & ".join([self._atom(a) for a in nu.atoms] + [self._con(c) for c in nu.constraints])
            concl.append(f"not (Ex {self._binder(nu.variables, times)}. {inner})")
        body = " & ".join(concl) if concl else "F"
        if f.existentials:
            body = f"(Ex {self._binder(f.existentials, times)}. {body})"
        else:
            body = f"({body})"
        return f"All {self._binder(f.universals, times)}. {prem} ==> {body}"

    def run(self) -> EmittedModel:
        self.header()
        self.setup_rules()
        for role in self.spec.roles:
            self.role_rules(role)
        self.lemmas()
        self.doc.add("end")
        prov = tuple(sorted(self.provenance, key=lambda p: p.claim))
        return EmittedModel(TAMARIN, model_name(self.spec.name), self.doc.text(), prov)


def emit_tamarin(ispec: InstrumentedSpec) -> EmittedModel:
    return _Emitter(ispec).run()
