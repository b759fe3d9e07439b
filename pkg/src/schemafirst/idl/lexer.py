"""Tokenizer for the schema IDL."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from ..errors import LexError
from .ast import SourcePos

KEYWORDS = frozenset({"namespace", "include", "typedef", "enum", "struct", "embeds", "optional"})

PUNCTUATION = {
    "@": "at",
    "{": "lbrace",
    "}": "rbrace",
    "<": "lt",
    ">": "gt",
    ",": "comma",
    ":": "colon",
    "=": "eq",
    ";": "semi",
}

_WORD = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*")
_INT = re.compile(r"-?[0-9]+")
_SPACE = re.compile(r"[ \t\r\n]+")
_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", '"': '"', "'": "'"}


@dataclass(frozen=True)
class Token:
    kind: str  # kw, ident, path, string, int, or a PUNCTUATION name
    value: Union[str, int]
    pos: SourcePos

    def __repr__(self) -> str:
        return f"{self.kind}:{self.value}"


class _Cursor:
    def __init__(self, source: str, file: str):
        self.source = source
        self.file = file
        self.offset = 0
        self.line = 1
        self.column = 1

    def pos(self) -> SourcePos:
        return SourcePos(self.file, self.line, self.column)

    def advance(self, n: int) -> str:
        text = self.source[self.offset:self.offset + n]
        for ch in text:
            if ch == "\n":
                self.line += 1
                self.column = 1
            else:
                self.column += 1
        self.offset += n
        return text


def tokenize(source: str, file: str = "<memory>") -> list[Token]:
    """Split ``source`` into tokens, discarding whitespace and comments."""
    cur = _Cursor(source, file)
    tokens: list[Token] = []
    src = source
    while cur.offset < len(src):
        ch = src[cur.offset]
        m = _SPACE.match(src, cur.offset)
        if m:
            cur.advance(m.end() - cur.offset)
            continue
        if src.startswith("//", cur.offset):
            end = src.find("\n", cur.offset)
            cur.advance((len(src) if end < 0 else end) - cur.offset)
            continue
        if src.startswith("/*", cur.offset):
            start = cur.pos()
            end = src.find("*/", cur.offset + 2)
            if end < 0:
                raise LexError("unterminated block comment", start)
            cur.advance(end + 2 - cur.offset)
            continue
        start = cur.pos()
        if ch in ('"', "'"):
            tokens.append(Token("string", _read_string(cur, ch), start))
            continue
        m = _INT.match(src, cur.offset)
        if m:
            cur.advance(m.end() - cur.offset)
            tokens.append(Token("int", int(m.group()), start))
            continue
        m = _WORD.match(src, cur.offset)
        if m:
            word = m.group()
            cur.advance(len(word))
            if "." in word:
                kind = "path"
            elif word in KEYWORDS:
                kind = "kw"
            else:
                kind = "ident"
            tokens.append(Token(kind, word, start))
            continue
        if ch in PUNCTUATION:
            cur.advance(1)
            tokens.append(Token(PUNCTUATION[ch], ch, start))
            continue
        raise LexError(f"illegal character {ch!r}", start)
    return tokens


def _read_string(cur: _Cursor, quote: str) -> str:
    start = cur.pos()
    cur.advance(1)
    out = []
    src = cur.source
    while True:
        if cur.offset >= len(src):
            raise LexError("unterminated string literal", start)
        ch = src[cur.offset]
        if ch == quote:
            cur.advance(1)
            return "".join(out)
        if ch == "\\":
            if cur.offset + 1 >= len(src):
                raise LexError("unterminated string literal", start)
            esc = src[cur.offset + 1]
            if esc not in _ESCAPES:
                raise LexError(f"unknown escape \\{esc}", cur.pos())
            out.append(_ESCAPES[esc])
            cur.advance(2)
            continue
        out.append(ch)
        cur.advance(1)
