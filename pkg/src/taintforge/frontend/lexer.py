"""Tokenizer for the PHP subset.

Byte offsets are tracked for every token so AST spans can round-trip to the
exact source spelling.  Doc comments (``/** ... */``) are emitted as ``doc``
tokens; the parser attaches them to the following declaration.  Plain comments
are dropped.  Text outside ``<?php ... ?>`` regions is skipped.
"""
from __future__ import annotations

from dataclasses import dataclass


class LexError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # var | name | int | float | sstring | dstring | op | doc | eof
    text: str
    line: int
    col: int
    start: int
    end: int

    def lower(self) -> str:
        return self.text.lower()


# Multi-character operators, longest first so maximal munch works.
_OPERATORS = [
    "===", "!==", "...", "<=>",
    "==", "!=", "<>", "<=", ">=", "&&", "||", "->", "::", "=>",
    ".=", "+=", "-=", "*=", "/=", "%=", "??", "++", "--",
    "=", ".", "+", "-", "*", "/", "%", "!", "?", ":", ";", ",",
    "(", ")", "{", "}", "[", "]", "<", ">", "&", "|", "@", "^", "~", "$",
]

_NAME_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_\\")
_NAME_CONT = _NAME_START | set("0123456789")
_DIGITS = set("0123456789")


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    i = 0
    line = 1
    col = 0
    n = len(text)
    in_php = False

    def advance(k: int) -> None:
        nonlocal i, line, col
        for _ in range(k):
            if i < n and text[i] == "\n":
                line += 1
                col = 0
            else:
                col += 1
            i += 1

    while i < n:
        if not in_php:
            nxt = text.find("<?php", i)
            if nxt < 0:
                # also accept short open tag at this position; otherwise done
                nxt = text.find("<?", i)
                if nxt < 0:
                    break
                advance(nxt - i + 2)
            else:
                advance(nxt - i + 5)
            in_php = True
            continue

        ch = text[i]
        if ch in " \t\r\n":
            advance(1)
            continue
        if text.startswith("?>", i):
            advance(2)
            in_php = False
            continue
        if text.startswith("//", i) or ch == "#":
            end = text.find("\n", i)
            advance((end if end >= 0 else n) - i)
            continue
        if text.startswith("/**", i) and not text.startswith("/**/", i):
            end = text.find("*/", i + 3)
            if end < 0:
                raise LexError("unterminated doc comment", line, col)
            start, sline, scol = i, line, col
            advance(end + 2 - i)
            toks.append(Token("doc", text[start:i], sline, scol, start, i))
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end < 0:
                raise LexError("unterminated comment", line, col)
            advance(end + 2 - i)
            continue
        if ch == "$":
            j = i + 1
            if j < n and text[j] in _NAME_START and text[j] != "\\":
                while j < n and text[j] in _NAME_CONT and text[j] != "\\":
                    j += 1
                start, sline, scol = i, line, col
                advance(j - i)
                toks.append(Token("var", text[start:j], sline, scol, start, j))
                continue
            # bare '$' (e.g. '$$name' or '::$' followed by '{'): emit operator
            start, sline, scol = i, line, col
            advance(1)
            toks.append(Token("op", "$", sline, scol, start, i))
            continue
        if ch in _NAME_START:
            j = i
            while j < n and text[j] in _NAME_CONT:
                j += 1
            start, sline, scol = i, line, col
            advance(j - i)
            toks.append(Token("name", text[start:j], sline, scol, start, j))
            continue
        if ch in _DIGITS:
            j = i
            while j < n and text[j] in _DIGITS:
                j += 1
            kind = "int"
            if j < n and text[j] == "x" and text[i] == "0":
                j += 1
                while j < n and text[j] in "0123456789abcdefABCDEF":
                    j += 1
            elif j < n and text[j] == "." and j + 1 < n and text[j + 1] in _DIGITS:
                kind = "float"
                j += 1
                while j < n and text[j] in _DIGITS:
                    j += 1
            start, sline, scol = i, line, col
            advance(j - i)
            toks.append(Token(kind, text[start:j], sline, scol, start, j))
            continue
        if ch == "'":
            j = i + 1
            while j < n:
                if text[j] == "\\":
                    j += 2
                    continue
                if text[j] == "'":
                    break
                j += 1
            if j >= n:
                raise LexError("unterminated string", line, col)
            start, sline, scol = i, line, col
            advance(j + 1 - i)
            toks.append(Token("sstring", text[start:j + 1], sline, scol, start, j + 1))
            continue
        if ch == '"':
            j = _scan_double_quote(text, i, line, col)
            start, sline, scol = i, line, col
            advance(j - i)
            toks.append(Token("dstring", text[start:j], sline, scol, start, j))
            continue
        if text.startswith("<<<", i):
            raise LexError("heredoc syntax is not supported", line, col)
        for op in _OPERATORS:
            if text.startswith(op, i):
                start, sline, scol = i, line, col
                advance(len(op))
                toks.append(Token("op", op, sline, scol, start, i))
                break
        else:
            raise LexError(f"unexpected character {ch!r}", line, col)

    toks.append(Token("eof", "", line, col, n, n))
    return toks


def _scan_double_quote(text: str, i: int, line: int, col: int) -> int:
    """Return the offset one past the closing quote, honouring escapes and
    ``{$ ... }`` interpolation blocks (which may themselves contain quotes)."""
    n = len(text)
    j = i + 1
    while j < n:
        ch = text[j]
        if ch == "\\":
            j += 2
            continue
        if ch == '"':
            return j + 1
        if ch == "{" and j + 1 < n and text[j + 1] == "$":
            depth = 1
            j += 2
            while j < n and depth:
                c = text[j]
                if c == "{":
                    depth += 1
                elif c == "}":
                    depth -= 1
                elif c == "'" or c == '"':
                    quote = c
                    j += 1
                    while j < n and text[j] != quote:
                        j += 2 if text[j] == "\\" else 1
                j += 1
            continue
        j += 1
    raise LexError("unterminated string", line, col)
