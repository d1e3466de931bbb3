"""Recursive-descent parser for the protocol DSL.

Grammar (informal)::

    protocol   ::= "protocol" STRING "{" primitives? theory? roles claims? "}"
    primitives ::= "primitives" "{" (IDENT "/" INT ("[" equation "]")? ";")* "}"
    theory     ::= "theory" "{" (equation ";")* "}"
    roles      ::= "roles" "{" role* "}"
    role       ::= IDENT "(" params ")" "{" step* "}"
    param      ::= IDENT ":" ("identity" | "value" | "ltk" "(" IDENT ")" | "pk" "(" IDENT ")")
    step       ::= "fresh" IDENT ";" | "send" term ";" | "recv" term ";"
                 | "let" IDENT "=" term ";" | "event" IDENT "(" terms ")" ";"
    claims     ::= "claims" "{" (KIND "(" claim-args ")" ";")* "}"
    claim-arg  ::= IDENT ":" (IDENT "[" idents "]" | "[" terms "]" | term)
"""

from __future__ import annotations

from .. import taxonomy as tx
from ..diagnostics import Diagnostic, SourceSpan
from ..ir import (
    IDENTITY, LTK, PK, VALUE, Event, Fresh, Let, Param, PropertyClaim, ProtocolSpec, Recv, RoleRef,
    RoleScript, Send, step_binds, user_function, validate_spec,
)
from ..terms import DEFAULT_SIGNATURE, App, RewriteRule, Var
from .lexer import Token, tokenize


class _Abort(Exception):
    pass


class _Sync(Exception):
    """Raised to resynchronise after a syntax error."""


class Parser:
    def __init__(self, src: str, file: str = "<input>"):
        self.file = file
        self.toks, self.diags = tokenize(src, file)
        self.pos = 0
        self.constants = {f.name for f in DEFAULT_SIGNATURE if f.arity == 0}

    # -- token helpers --------------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "EOF":
            self.pos += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.kind in ("PUNCT", "KW") and self.tok.text == text

    def error(self, msg: str, tok: Token | None = None) -> None:
        tok = tok or self.tok
        self.diags.append(Diagnostic(msg, tok.span(self.file)))

    def expect(self, text: str) -> Token:
        if self.at(text):
            return self.advance()
        found = self.tok.text or "end of input"
        self.error(f"expected '{text}', found '{found}'")
        raise _Sync()

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind == "IDENT":
            return self.advance()
        if self.tok.kind == "KW":
            self.error(f"'{self.tok.text}' is a reserved keyword and cannot be used as {what}")
        else:
            self.error(f"expected {what}, found '{self.tok.text or 'end of input'}'")
        raise _Sync()

    def span(self, start: Token, end: Token | None = None) -> SourceSpan:
        end = end or self.toks[max(self.pos - 1, 0)]
        if (end.end_line, end.end_col) < (start.line, start.col):
            end = start
        return SourceSpan(self.file, (start.line, start.col), (end.end_line, end.end_col))

    def skip_to(self, stops: str = ";}") -> None:
        """Skip to the next ';' (consumed) or an unmatched '}' (not consumed)."""
        depth = 0
        while self.tok.kind != "EOF":
            t = self.tok
            if t.kind == "PUNCT":
                if t.text in "([{":
                    depth += 1
                elif t.text in ")]}":
                    if depth == 0 and t.text == "}":
                        return
                    depth = max(depth - 1, 0)
                elif t.text == ";" and depth == 0 and ";" in stops:
                    self.advance()
                    return
            self.advance()

    def skip_block(self) -> None:
        """Skip a balanced '{...}' block starting at the current '{'."""
        if not self.at("{"):
            return
        depth = 0
        while self.tok.kind != "EOF":
            t = self.advance()
            if t.kind == "PUNCT" and t.text == "{":
                depth += 1
            elif t.kind == "PUNCT" and t.text == "}":
                depth -= 1
                if depth == 0:
                    return

    # -- terms ------------------------------------------------------------------------
    def term(self, bound=None):
        start = self.tok
        name = self.ident("a term")
        if self.at("("):
            self.advance()
            args = []
            if not self.at(")"):
                args.append(self.term(bound))
                while self.at(","):
                    self.advance()
                    args.append(self.term(bound))
            self.expect(")")
            return App(name.text, tuple(args), span=self.span(start))
        if name.text in self.constants and (bound is None or name.text not in bound):
            return App(name.text, (), span=self.span(start))
        return Var(name.text, span=self.span(start))

    def terms_until(self, close: str, bound=None):
        out = []
        if not self.at(close):
            out.append(self.term(bound))
            while self.at(","):
                self.advance()
                out.append(self.term(bound))
        self.expect(close)
        return tuple(out)

    # -- sections -------------------------------------------------------------------------
    def parse(self) -> ProtocolSpec | None:
        sig, rules, roles, claims = [], [], [], []
        try:
            start = self.tok
            self.expect("protocol")
            if self.tok.kind != "STRING":
                self.error("expected protocol name string")
                raise _Abort()
            name = self.advance().text
            self.expect("{")
        except (_Sync, _Abort):
            return None
        seen = set()
        order = ["primitives", "theory", "roles", "claims"]
        last = -1
        while not self.at("}") and self.tok.kind != "EOF":
            t = self.tok
            if t.kind == "KW" and t.text in order:
                idx = order.index(t.text)
                if t.text in seen:
                    self.error(f"duplicate '{t.text}' section")
                elif idx < last:
                    self.error(f"'{t.text}' section out of order")
                seen.add(t.text)
                last = max(last, idx)
                self.advance()
                try:
                    self.expect("{")
                except _Sync:
                    self.skip_to(";")
                    continue
                getattr(self, f"_section_{t.text}")(sig, rules, roles, claims)
            else:
                self.error(f"expected a section (primitives, theory, roles, claims), found '{t.text or 'end of input'}'")
                self.advance()
                if self.at("{"):
                    self.skip_block()
        if self.tok.kind == "EOF":
            self.error("unbalanced braces: expected '}' to close protocol")
            return None
        self.advance()
        if self.tok.kind != "EOF":
            self.error(f"unexpected '{self.tok.text}' after protocol")
        if "roles" not in seen:
            self.error("protocol has no 'roles' section", start)
        sig_specs = [user_function(n, a, rules) for n, a, _ in sig]
        return ProtocolSpec(name, tuple(sig_specs), tuple(rules), tuple(roles), tuple(claims), span=self.span(start))

    def _close(self) -> bool:
        if self.at("}"):
            self.advance()
            return True
        self.error("unbalanced braces: expected '}'")
        return False

    def _section_primitives(self, sig, rules, roles, claims):
        while not self.at("}") and self.tok.kind != "EOF":
            try:
                name = self.ident("a function name")
                self.expect("/")
                if self.tok.kind != "INT":
                    self.error("expected arity")
                    raise _Sync()
                arity = int(self.advance().text)
                if arity == 0:
                    self.constants.add(name.text)
                sig.append((name.text, arity, name))
                if self.at("["):
                    self.advance()
                    rules.append(self.equation())
                    self.expect("]")
                if self.at(";"):
                    self.advance()
            except _Sync:
                self.skip_to()
        self._close()

    def equation(self) -> RewriteRule:
        start = self.tok
        lhs = self.term()
        self.expect("=")
        rhs = self.term()
        if not isinstance(lhs, App):
            self.error("equation left-hand side must be a function application", start)
            raise _Sync()
        return RewriteRule(lhs, rhs)

    def _section_theory(self, sig, rules, roles, claims):
        while not self.at("}") and self.tok.kind != "EOF":
            try:
                rules.append(self.equation())
                self.expect(";")
            except _Sync:
                self.skip_to()
        self._close()

    def _section_roles(self, sig, rules, roles, claims):
        while not self.at("}") and self.tok.kind != "EOF":
            try:
                roles.append(self.role())
            except _Sync:
                self.skip_to(";")
                if self.at("{"):
                    self.skip_block()
        self._close()

    def param(self) -> Param:
        start = self.tok
        name = self.ident("a parameter name")
        self.expect(":")
        kind_tok = self.ident("a parameter kind")
        kind, owner = kind_tok.text, None
        if kind in (LTK, PK):
            self.expect("(")
            owner = self.ident("an identity parameter").text
            self.expect(")")
        elif kind not in (IDENTITY, VALUE):
            self.error(f"unknown parameter kind '{kind}' (expected identity, value, ltk(..) or pk(..))", kind_tok)
            raise _Sync()
        return Param(name.text, kind, owner, span=self.span(start))

    def role(self) -> RoleScript:
        start = self.tok
        name = self.ident("a role name")
        self.expect("(")
        params = []
        if not self.at(")"):
            params.append(self.param())
            while self.at(","):
                self.advance()
                params.append(self.param())
        self.expect(")")
        self.expect("{")
        bound = [p.name for p in params]
        steps = []
        while not self.at("}") and self.tok.kind != "EOF":
            try:
                s = self.step(bound)
                steps.append(s)
                bound.extend(step_binds(s, bound))
            except _Sync:
                self.skip_to()
        self._close()
        return RoleScript(name.text, tuple(params), tuple(steps), span=self.span(start))

    def step(self, bound):
        start = self.tok
        if self.at("fresh"):
            self.advance()
            v = self.ident("a name")
            self.expect(";")
            return Fresh(v.text, span=self.span(start))
        if self.at("send"):
            self.advance()
            t = self.term(bound)
            self.expect(";")
            return Send(t, span=self.span(start))
        if self.at("recv"):
            self.advance()
            t = self.term(bound)
            self.expect(";")
            return Recv(t, span=self.span(start))
        if self.at("let"):
            self.advance()
            v = self.ident("a name")
            self.expect("=")
            t = self.term(bound)
            self.expect(";")
            return Let(v.text, t, span=self.span(start))
        if self.at("event"):
            self.advance()
            label = self.ident("an event label")
            self.expect("(")
            args = self.terms_until(")", bound)
            self.expect(";")
            return Event(label.text, args, span=self.span(start))
        self.error(f"expected a step (fresh, send, recv, let, event), found '{self.tok.text or 'end of input'}'")
        raise _Sync()

    def _section_claims(self, sig, rules, roles, claims):
        while not self.at("}") and self.tok.kind != "EOF":
            try:
                claims.append(self.claim())
            except _Sync:
                self.skip_to()
        self._close()

    def claim(self) -> PropertyClaim:
        start = self.tok
        kw = self.ident("a property kind")
        kind = tx.kind_from_keyword(kw.text)
        if kind is None:
            self.error(f"unknown property kind '{kw.text}'", kw)
            raise _Sync()
        schema = {a.name: a for a in tx.CLAIM_SCHEMAS[kind.leaf]} if kind.is_leaf else {}
        self.expect("(")
        args = {}
        if not self.at(")"):
            while True:
                key = self.ident("an argument name")
                self.expect(":")
                if key.text in args:
                    self.error(f"duplicate argument '{key.text}'", key)
                args[key.text] = self.claim_value(schema.get(key.text))
                if not self.at(","):
                    break
                self.advance()
        self.expect(")")
        self.expect(";")
        return PropertyClaim(kind, args, span=self.span(start))

    def claim_value(self, spec):
        start = self.tok
        if self.at("["):
            self.advance()
            return self.terms_until("]")
        if self.tok.kind == "IDENT" and self.peek().kind == "PUNCT" and self.peek().text == "[":
            role = self.advance().text
            self.advance()
            names = []
            if not self.at("]"):
                names.append(self.ident().text)
                while self.at(","):
                    self.advance()
                    names.append(self.ident().text)
            self.expect("]")
            return RoleRef(role, tuple(names), span=self.span(start))
        t = self.term()
        if spec is not None and spec.kind == "role" and isinstance(t, Var):
            return RoleRef(t.id, (), span=t.span)
        return t


def parse(source: str | bytes, file: str = "<input>") -> ProtocolSpec | list[Diagnostic]:
    """Parse and validate; returns a spec or the collected diagnostics."""
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as e:
            return [Diagnostic(f"source is not valid UTF-8 ({e.reason})", SourceSpan(file, (1, 1), (1, 1)))]
    p = Parser(source, file)
    try:
        spec = p.parse()
    except RecursionError:
        return [Diagnostic("term nesting too deep", SourceSpan(file, (1, 1), (1, 1)))]
    if p.diags or spec is None:
        return p.diags or [Diagnostic("could not parse protocol", SourceSpan(file, (1, 1), (1, 1)))]
    report = validate_spec(spec)
    if report.errors:
        fallback = spec.span
        return [d if d.span is not None else Diagnostic(d.message, fallback, d.severity) for d in report.errors]
    return spec


def parse_file(path) -> ProtocolSpec | list[Diagnostic]:
    from pathlib import Path

    p = Path(path)
    return parse(p.read_bytes(), str(p))
