"""Tokenizer for MiniLang source text."""

from __future__ import annotations

from dataclasses import dataclass

KEYWORDS = {"fn", "var", "if", "else", "while", "return", "int", "bool", "true", "false"}

TWO_CHAR_OPS = {"<=", ">=", "==", "!=", "&&", "||", "->"}
ONE_CHAR = set("+-*/%<>!=(){}:;,")


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident' | 'num' | 'kw' | 'op' | 'eof'
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        if c == "#":  # comment to end of line
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_col = col
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            kind = "kw" if text in KEYWORDS else "ident"
            toks.append(Token(kind, text, line, start_col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            toks.append(Token("num", source[i:j], line, start_col))
            col += j - i
            i = j
            continue
        two = source[i : i + 2]
        if two in TWO_CHAR_OPS:
            toks.append(Token("op", two, line, start_col))
            i += 2
            col += 2
            continue
        if c in ONE_CHAR:
            toks.append(Token("op", c, line, start_col))
            i += 1
            col += 1
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks
