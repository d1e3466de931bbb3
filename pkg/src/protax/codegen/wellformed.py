"""Structural checks on emitted models: delimiters, declarations, event arities, names."""

from __future__ import annotations

import re

from ..diagnostics import SourceSpan, ValidationReport
from .common import PROVERIF, TAMARIN, EmittedModel

_IDENT_CALL = re.compile(r"(?<![\w'~$#])([A-Za-z_][\w-]*)\s*\(")
_PAIRS = {")": "(", "]": "[", "}": "{"}


def _span(file: str, line: int, col: int) -> SourceSpan:
    return SourceSpan(file, (line, col), (line, col))


def _strip_comments(text: str, dialect: str) -> str:
    """Blank out comments while keeping line and column positions."""
    def blank(m):
        return re.sub(r"[^\n]", " ", m.group(0))

    if dialect == PROVERIF:
        return re.sub(r"\(\*.*?\*\)", blank, text, flags=re.S)
    text = re.sub(r"/\*.*?\*/", blank, text, flags=re.S)
    return re.sub(r"//[^\n]*", blank, text)


def _positions(text: str):
    line, col = 1, 1
    for ch in text:
        yield ch, line, col
        if ch == "\n":
            line, col = line + 1, 1
        else:
            col += 1


def _check_delimiters(text: str, file: str, report: ValidationReport) -> None:
    stack = []
    in_string = None
    for ch, line, col in _positions(text):
        if ch == '"':
            in_string = None if in_string else (line, col)
            continue
        if in_string:
            continue
        if ch in "([{":
            stack.append((ch, line, col))
        elif ch in ")]}":
            if not stack or stack[-1][0] != _PAIRS[ch]:
                report.add(f"unbalanced '{ch}'", _span(file, line, col))
                return
            stack.pop()
    if in_string:
        report.add("unterminated string", _span(file, *in_string))
    if stack:
        ch, line, col = stack[-1]
        report.add(f"unclosed '{ch}'", _span(file, line, col))


def _args(text: str, open_idx: int, opens: str = "(<[") -> tuple[int, int]:
    """Argument count of the call whose '(' is at ``open_idx`` and the index after ')'."""
    depth = 0
    count = 0
    nonempty = False
    i = open_idx
    while i < len(text):
        ch = text[i]
        if ch in opens:
            depth += 1
            if depth > 1:
                nonempty = True
        elif ch in _closers(opens):
            depth -= 1
            if depth == 0:
                return (count + 1 if nonempty else 0), i + 1
        elif ch == "," and depth == 1:
            count += 1
        elif not ch.isspace() and depth >= 1:
            nonempty = True
        i += 1
    return (count + 1 if nonempty else 0), i


def _closers(opens: str) -> str:
    return "".join({"(": ")", "<": ">", "[": "]"}[c] for c in opens)


def _line_col(text: str, idx: int) -> tuple[int, int]:
    line = text.count("\n", 0, idx) + 1
    col = idx - (text.rfind("\n", 0, idx) + 1) + 1
    return line, col


# -- ProVerif ---------------------------------------------------------------------------------

_PV_KEYWORDS = frozenset({
    "in", "out", "event", "inj-event", "attacker", "choice", "new", "get", "insert", "if", "let",
    "phase", "query", "not", "mess", "table", "fun", "reduc", "free", "const", "type", "process",
})
_PV_DECL = re.compile(r"^(free|const|fun|event|table|let|type)\s+([A-Za-z_][\w, ]*?)\s*(\((.*?)\))?\s*[:.=]")


def _check_proverif(model: EmittedModel, report: ValidationReport) -> None:
    file = model.filename
    text = _strip_comments(model.text, PROVERIF)
    _check_delimiters(text, file, report)
    declared: dict[str, tuple[str, int | None]] = {}
    uses: list[tuple[str, int]] = []
    in_reduc = False
    offset = 0
    for ln, line in enumerate(text.split("\n"), 1):
        start = offset
        offset += len(line) + 1
        if line.startswith("reduc"):
            in_reduc = True
        if in_reduc:
            m = re.search(r"^\s*(?:otherwise\s+)?([A-Za-z_]\w*)\(.*\)\s*=", line)
            if m:
                declared.setdefault(m.group(1), ("reduc", None))
            if line.rstrip().endswith("."):
                in_reduc = False
            continue
        m = _PV_DECL.match(line)
        if m:
            kw, names, _, args = m.groups()
            arity = None if kw in ("free", "const", "type") else (
                len(args.split(",")) if args and args.strip() else 0)
            for name in (n.strip() for n in names.split(",")):
                if name in declared:
                    report.add(f"duplicate declaration of {name}", _span(file, ln, 1))
                declared[name] = (kw, arity)
            if kw != "let":
                continue
            # parameter list of a process macro is not a use
            line_body = line[m.end():]
            start += m.end()
        else:
            line_body = line
        for cm in _IDENT_CALL.finditer(line_body):
            uses.append((cm.group(1), start + cm.start(1)))
    for name, idx in uses:
        if name in _PV_KEYWORDS:
            continue
        line, col = _line_col(text, idx)
        if name not in declared:
            report.add(f"undeclared symbol {name}", _span(file, line, col))
            continue
        kw, arity = declared[name]
        if kw in ("fun", "event", "table") and arity is not None:
            n, _ = _args(text, text.index("(", idx), "(")
            if n != arity:
                report.add(f"{name} used with {n} arguments, declared with {arity}", _span(file, line, col))
    for m in re.finditer(r"\b(?:inj-event|event)\s*\(?\s*([A-Za-z_]\w*)", text):
        if text.rfind("\n", 0, m.start()) + 1 == m.start():
            continue
        name = m.group(1)
        if name in declared and declared[name][0] != "event":
            line, col = _line_col(text, m.start(1))
            report.add(f"{name} is not an event", _span(file, line, col))
    _check_names(re.findall(r"^\(\* ([a-z_]+_\d+) \*\)$", model.text, flags=re.M), file, report, "query")


# -- Tamarin ------------------------------------------------------------------------------------

_TM_BUILTIN_FUNCTIONS = frozenset({"fst", "snd", "diff"})


def _check_tamarin(model: EmittedModel, report: ValidationReport) -> None:
    file = model.filename
    raw = model.text
    text = _strip_comments(raw, TAMARIN)
    _check_delimiters(text, file, report)
    if not re.search(r"^theory \w+\s*$", text, flags=re.M) or "\nbegin" not in text:
        report.add("missing theory header", _span(file, 1, 1))
    if not re.search(r"^end\s*$", text, flags=re.M):
        report.add("missing end", _span(file, max(1, text.count("\n")), 1))
    functions: dict[str, int] = {}
    m = re.search(r"^functions:(.*?)(?:^\s*$)", text, flags=re.M | re.S)
    if m:
        for name, arity in re.findall(r"([A-Za-z_]\w*)/(\d+)", m.group(1)):
            functions[name] = int(arity)
    actions: dict[str, int] = {}
    rule_names = []
    lemma_names = []
    for line in text.split("\n"):
        rm = re.match(r"^rule (\w+):", line)
        if rm:
            rule_names.append(rm.group(1))
        lm = re.match(r"^lemma (\w+):", line)
        if lm:
            lemma_names.append(lm.group(1))
    # function symbols: lowercase calls must be declared
    for mm in _IDENT_CALL.finditer(text):
        name = mm.group(1)
        if name[0].isupper() or name in _TM_BUILTIN_FUNCTIONS:
            continue
        if name in ("functions", "equations", "theory", "rule", "lemma", "not"):
            continue
        line, col = _line_col(text, mm.start(1))
        if name not in functions:
            report.add(f"undeclared function {name}", _span(file, line, col))
            continue
        n, _ = _args(text, mm.end() - 1)
        if n != functions[name]:
            report.add(f"function {name} applied to {n} arguments, declared with {functions[name]}", _span(file, line, col))
    # action facts inside --[ ... ]->
    for am in re.finditer(r"--\[(.*?)\]->", text, flags=re.S):
        seg = am.group(1)
        base = am.start(1)
        for fm in re.finditer(r"([A-Z]\w*)\s*\(", seg):
            n, _ = _args(seg, fm.end() - 1)
            name = fm.group(1)
            if name in actions and actions[name] != n:
                line, col = _line_col(text, base + fm.start(1))
                report.add(f"action {name} used with {n} and {actions[name]} arguments", _span(file, line, col))
            actions.setdefault(name, n)
    # lemma atoms must refer to actions of matching arity
    for lm in re.finditer(r'^lemma \w+:\s*\n\s*"(.*?)"', text, flags=re.M | re.S):
        body = lm.group(1)
        base = lm.start(1)
        for fm in re.finditer(r"([A-Z]\w*)\s*\((?=[^@]*@)", body):
            name = fm.group(1)
            if name in ("K", "All", "Ex"):
                continue
            n, _ = _args(body, fm.end() - 1)
            line, col = _line_col(text, base + fm.start(1))
            if name not in actions:
                report.add(f"lemma refers to undeclared action {name}", _span(file, line, col))
            elif actions[name] != n:
                report.add(f"action {name} used with {n} arguments in a lemma, {actions[name]} in rules", _span(file, line, col))
    _check_names(rule_names, file, report, "rule")
    _check_names(lemma_names, file, report, "lemma")


def _check_names(names, file, report, what) -> None:
    seen = set()
    for n in names:
        if n in seen:
            report.add(f"duplicate {what} name {n}", _span(file, 1, 1))
        seen.add(n)


def wellformed(model: EmittedModel) -> ValidationReport:
    report = ValidationReport()
    if model.dialect == PROVERIF:
        _check_proverif(model, report)
    elif model.dialect == TAMARIN:
        _check_tamarin(model, report)
    else:
        report.add(f"unknown dialect {model.dialect}")
    return report
