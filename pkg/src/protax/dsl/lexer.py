from __future__ import annotations

from dataclasses import dataclass

from ..diagnostics import Diagnostic, SourceSpan

KEYWORDS = frozenset({
    "protocol", "primitives", "theory", "roles", "claims",
    "fresh", "send", "recv", "let", "event",
})
PUNCT = frozenset("{}()[],;:/=")


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, KW, INT, STRING, PUNCT, EOF
    text: str
    line: int
    col: int
    end_line: int
    end_col: int

    def span(self, file: str) -> SourceSpan:
        return SourceSpan(file, (self.line, self.col), (self.end_line, self.end_col))


def _is_ident_start(ch: str) -> bool:
    return ch.isascii() and (ch.isalpha() or ch == "_")


def _is_ident(ch: str) -> bool:
    return ch.isascii() and (ch.isalnum() or ch == "_")


def tokenize(src: str, file: str = "<input>") -> tuple[list[Token], list[Diagnostic]]:
    toks: list[Token] = []
    diags: list[Diagnostic] = []
    i, line, col, n = 0, 1, 1, len(src)

    def here(l, c, el=None, ec=None):
        return SourceSpan(file, (l, c), (el or l, ec or c))

    while i < n:
        ch = src[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r\f\v﻿":
            i += 1
            col += 1
            continue
        if src.startswith("//", i):
            while i < n and src[i] != "\n":
                i += 1
                col += 1
            continue
        start_l, start_c = line, col
        if _is_ident_start(ch):
            j = i
            while j < n and _is_ident(src[j]):
                j += 1
            text = src[i:j]
            col += j - i
            i = j
            toks.append(Token("KW" if text in KEYWORDS else "IDENT", text, start_l, start_c, line, col))
            continue
        if ch.isascii() and ch.isdigit():
            j = i
            while j < n and src[j].isascii() and src[j].isdigit():
                j += 1
            text = src[i:j]
            col += j - i
            i = j
            toks.append(Token("INT", text, start_l, start_c, line, col))
            continue
        if ch == '"':
            j = i + 1
            while j < n and src[j] not in '"\n':
                j += 1
            if j >= n or src[j] != '"':
                diags.append(Diagnostic("unterminated string literal", here(start_l, start_c, line, col + (j - i))))
                col += j - i
                i = j
                continue
            text = src[i + 1:j]
            col += j + 1 - i
            i = j + 1
            toks.append(Token("STRING", text, start_l, start_c, line, col))
            continue
        if ch in PUNCT:
            i += 1
            col += 1
            toks.append(Token("PUNCT", ch, start_l, start_c, line, col))
            continue
        diags.append(Diagnostic(f"unexpected character {ch!r}", here(start_l, start_c, line, col + 1)))
        i += 1
        col += 1
    toks.append(Token("EOF", "", line, col, line, col))
    return toks, diags
