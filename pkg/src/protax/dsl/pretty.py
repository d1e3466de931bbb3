"""Canonical DSL rendering; ``parse(pretty(s)) == s`` up to source spans."""

from __future__ import annotations

from .. import taxonomy as tx
from ..ir import Event, Fresh, Let, Param, PropertyClaim, ProtocolSpec, Recv, RoleRef, RoleScript, Send
from ..terms import App, Name, Var


def term(t) -> str:
    if isinstance(t, App):
        if not t.args:
            return t.fn
        return f"{t.fn}({', '.join(term(a) for a in t.args)})"
    if isinstance(t, (Var, Name)):
        return t.id
    raise TypeError(f"cannot render {t!r}")


def _param(p: Param) -> str:
    if p.owner is not None:
        return f"{p.name}: {p.kind}({p.owner})"
    return f"{p.name}: {p.kind}"


def _step(s) -> str:
    if isinstance(s, Fresh):
        return f"fresh {s.var};"
    if isinstance(s, Send):
        return f"send {term(s.term)};"
    if isinstance(s, Recv):
        return f"recv {term(s.pattern)};"
    if isinstance(s, Let):
        return f"let {s.var} = {term(s.term)};"
    if isinstance(s, Event):
        return f"event {s.label}({', '.join(term(a) for a in s.args)});"
    raise TypeError(f"unknown step {s!r}")


def _value(v) -> str:
    if isinstance(v, RoleRef):
        return f"{v.role}[{', '.join(v.vars)}]" if v.vars else v.role
    if isinstance(v, tuple):
        return "[" + ", ".join(term(t) for t in v) + "]"
    return term(v)


def _claim(c: PropertyClaim) -> str:
    if c.kind.is_leaf:
        order = [a.name for a in tx.claim_schema(c.kind)]
    else:
        order = []
    keys = [k for k in order if k in c.args] + sorted(k for k in c.args if k not in order)
    inner = ", ".join(f"{k}: {_value(c.args[k])}" for k in keys)
    return f"{c.kind.keyword}({inner});"


def role(r: RoleScript, indent: str = "    ") -> list[str]:
    out = [f"{indent}{r.name}({', '.join(_param(p) for p in r.params)}) {{"]
    out += [f"{indent}    {_step(s)}" for s in r.steps]
    out.append(f"{indent}}}")
    return out


def pretty(spec: ProtocolSpec) -> str:
    lines = [f'protocol "{spec.name}" {{']
    if spec.signature:
        lines.append("  primitives {")
        lines += [f"    {f.name}/{f.arity};" for f in spec.signature]
        lines.append("  }")
    if spec.theory:
        lines.append("  theory {")
        lines += [f"    {term(r.lhs)} = {term(r.rhs)};" for r in spec.theory]
        lines.append("  }")
    lines.append("  roles {")
    for r in spec.roles:
        lines += role(r)
    lines.append("  }")
    if spec.claims:
        lines.append("  claims {")
        lines += [f"    {_claim(c)}" for c in spec.claims]
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"
