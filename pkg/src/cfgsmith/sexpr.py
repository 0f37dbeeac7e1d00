"""Minimal SMT-LIB s-expression reader.

Atoms come back as :class:`Symbol` (plain or ``|quoted|``) or ``str`` for
numerals, ``#b``/``#x`` literals and string literals, each tagged with the
source line/column so parse errors can point at the offending spot.
"""

from __future__ import annotations

from dataclasses import dataclass


class ParseError(ValueError):
    def __init__(self, msg, line=None, col=None):
        self.line, self.col = line, col
        where = f"line {line}, column {col}: " if line is not None else ""
        super().__init__(where + msg)


@dataclass(frozen=True)
class Symbol:
    name: str
    quoted: bool = False
    line: int = 0
    col: int = 0

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Literal:
    text: str
    line: int = 0
    col: int = 0

    def __str__(self):
        return self.text


@dataclass
class SList(list):
    line: int = 0
    col: int = 0

    def __init__(self, items=(), line=0, col=0):
        list.__init__(self, items)
        self.line, self.col = line, col

    def __hash__(self):
        return id(self)


_DELIMS = set("()|;\"")


def tokenize(text: str, line0: int = 1):
    i, n = 0, len(text)
    line, col0 = line0, 0
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col0 = i + 1
            i += 1
        elif ch.isspace():
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield ch, line, i - col0 + 1
            i += 1
        elif ch == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise ParseError("unterminated quoted symbol", line, i - col0 + 1)
            yield Symbol(text[i + 1 : j], True, line, i - col0 + 1), line, i - col0 + 1
            line += text.count("\n", i, j)
            i = j + 1
        elif ch == '"':
            j = i + 1
            while j < n and not (text[j] == '"' and (j + 1 >= n or text[j + 1] != '"')):
                j += 2 if text[j] == '"' else 1
            if j >= n:
                raise ParseError("unterminated string", line, i - col0 + 1)
            yield Literal(text[i : j + 1], line, i - col0 + 1), line, i - col0 + 1
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in _DELIMS:
                j += 1
            tok = text[i:j]
            c = i - col0 + 1
            if tok[0].isdigit() or tok[0] == "#" or tok[0] == "-" and tok[1:].isdigit():
                yield Literal(tok, line, c), line, c
            else:
                yield Symbol(tok, False, line, c), line, c
            i = j


def parse_all(text: str, line0: int = 1) -> list:
    """Parse every top-level s-expression in ``text``."""
    stack: list[SList] = []
    out = []
    for tok, line, col in tokenize(text, line0):
        if tok == "(":
            stack.append(SList(line=line, col=col))
        elif tok == ")":
            if not stack:
                raise ParseError("unbalanced ')'", line, col)
            done = stack.pop()
            (stack[-1] if stack else out).append(done)
        else:
            (stack[-1] if stack else out).append(tok)
    if stack:
        raise ParseError("unbalanced '('", stack[-1].line, stack[-1].col)
    return out


def parse_one(text: str, line0: int = 1):
    items = parse_all(text, line0)
    if len(items) != 1:
        raise ParseError(f"expected one s-expression, found {len(items)}", line0, 1)
    return items[0]


def paren_balance(text: str) -> int:
    """Net open parens in ``text``, ignoring quoted symbols, strings and comments."""
    depth = 0
    for tok, _, _ in tokenize(text):
        if tok == "(":
            depth += 1
        elif tok == ")":
            depth -= 1
    return depth


def is_simple_symbol(name: str) -> bool:
    if not name or name[0].isdigit():
        return False
    ok = set("~!$%^&*_-+=<>.?/")
    return all(c.isalnum() or c in ok for c in name)


def quote_symbol(name: str) -> str:
    if is_simple_symbol(name):
        return name
    if "|" in name or "\\" in name:
        raise ValueError(f"symbol {name!r} cannot be quoted")
    return f"|{name}|"
