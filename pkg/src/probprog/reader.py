"""Reader and printer for the surface language.

Programs are sequences of bracketed directives::

    [ASSUME a (bernoulli 0.7)]
    [OBSERVE (flip a) true]
    [PREDICT (+ 1 2)]

Inside a directive only parenthesised S-expressions are allowed.
``;`` starts a comment that runs to the end of the line.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

__all__ = [
    "RealLit", "IntLit", "BoolLit", "Symbol", "List", "Quote", "Expr",
    "Assume", "Observe", "Predict", "Directive",
    "ReaderError", "parse_program", "parse_expr", "print_expr", "print_directive",
    "print_program", "format_real",
]


@dataclass(frozen=True)
class RealLit:
    value: float


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Symbol:
    name: str


@dataclass(frozen=True)
class List:
    items: tuple

    def __post_init__(self):
        if not isinstance(self.items, tuple):
            object.__setattr__(self, "items", tuple(self.items))


@dataclass(frozen=True)
class Quote:
    inner: "Expr"


Expr = Union[RealLit, IntLit, BoolLit, Symbol, List, Quote]


@dataclass(frozen=True)
class Assume:
    name: str
    body: Expr


@dataclass(frozen=True)
class Observe:
    body: Expr
    value: Expr


@dataclass(frozen=True)
class Predict:
    body: Expr


Directive = Union[Assume, Observe, Predict]


class ReaderError(ValueError):
    """Syntax error with a 1-based source position."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


_INT_RE = re.compile(r"[+-]?\d+\Z")
_REAL_RE = re.compile(r"[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?\Z")
_TRUE = {"true", "True", "#t"}
_FALSE = {"false", "False", "#f"}
_DELIMS = set("()[]'`;\"")


@dataclass
class _Token:
    text: str
    line: int
    column: int


def _tokenize(text: str) -> Iterator[_Token]:
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col = line + 1, 1
            i += 1
        elif ch.isspace():
            i += 1
            col += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()[]'`":
            yield _Token(ch, line, col)
            i += 1
            col += 1
        elif ch == '"':
            raise ReaderError("string literals are not supported", line, col)
        else:
            start = i
            while i < n and not text[i].isspace() and text[i] not in _DELIMS:
                i += 1
            yield _Token(text[start:i], line, col)
            col += i - start


def _atom(token: _Token) -> Expr:
    t = token.text
    if _INT_RE.match(t):
        return IntLit(int(t))
    if _REAL_RE.match(t):
        return RealLit(float(t))
    if t in _TRUE:
        return BoolLit(True)
    if t in _FALSE:
        return BoolLit(False)
    return Symbol(t)


class _Parser:
    def __init__(self, text: str):
        self.tokens = list(_tokenize(text))
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else _Token("", 1, 1)
            raise ReaderError("unexpected end of input", last.line, last.column)
        self.pos += 1
        return tok

    def expr(self) -> Expr:
        tok = self.next()
        if tok.text == "(":
            items = []
            while True:
                nxt = self.peek()
                if nxt is None:
                    raise ReaderError("unbalanced '('", tok.line, tok.column)
                if nxt.text == ")":
                    self.pos += 1
                    return List(tuple(items))
                if nxt.text in "[]":
                    raise ReaderError(f"unexpected '{nxt.text}' inside expression",
                                      nxt.line, nxt.column)
                items.append(self.expr())
        if tok.text in ("'", "`"):
            if self.peek() is None:
                raise ReaderError("quote without expression", tok.line, tok.column)
            return Quote(self.expr())
        if tok.text in (")", "[", "]"):
            raise ReaderError(f"unexpected '{tok.text}'", tok.line, tok.column)
        return _atom(tok)

    def directive(self) -> Directive:
        open_tok = self.next()
        if open_tok.text != "[":
            raise ReaderError(f"expected '[' to open a directive, got {open_tok.text!r}",
                              open_tok.line, open_tok.column)
        kw = self.next()
        keyword = kw.text.upper()
        if keyword == "ASSUME":
            name_tok = self.next()
            name = _atom(name_tok)
            if not isinstance(name, Symbol):
                raise ReaderError(f"ASSUME needs a symbol name, got {name_tok.text!r}",
                                  name_tok.line, name_tok.column)
            result: Directive = Assume(name.name, self.expr())
        elif keyword == "OBSERVE":
            body = self.expr()
            value_tok = self.peek()
            value = self.expr()
            if not _is_constant(value):
                raise ReaderError("OBSERVE value must be a literal or quoted constant",
                                  value_tok.line, value_tok.column)
            result = Observe(body, value)
        elif keyword == "PREDICT":
            result = Predict(self.expr())
        else:
            raise ReaderError(f"unknown directive {kw.text!r}", kw.line, kw.column)
        close = self.next()
        if close.text != "]":
            raise ReaderError(f"expected ']' to close directive, got {close.text!r}",
                              close.line, close.column)
        return result


def _is_constant(e: Expr) -> bool:
    return isinstance(e, (RealLit, IntLit, BoolLit, Quote))


def parse_program(text: str) -> list:
    """Parse directive text into a list of directives in source order."""
    parser = _Parser(text)
    out = []
    while parser.peek() is not None:
        out.append(parser.directive())
    return out


def parse_expr(text: str) -> Expr:
    """Parse exactly one expression."""
    parser = _Parser(text)
    if parser.peek() is None:
        raise ReaderError("empty input")
    e = parser.expr()
    extra = parser.peek()
    if extra is not None:
        raise ReaderError(f"trailing tokens after expression: {extra.text!r}",
                          extra.line, extra.column)
    return e


def format_real(x: float) -> str:
    # repr gives the shortest string that round-trips; make sure it still reads as real
    s = repr(float(x))
    if s in ("inf", "-inf", "nan"):
        raise ValueError(f"cannot print non-finite real {s}")
    if not any(c in s for c in ".eE"):
        s += ".0"
    return s


def print_expr(e: Expr) -> str:
    if isinstance(e, RealLit):
        return format_real(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, Symbol):
        return e.name
    if isinstance(e, Quote):
        return "'" + print_expr(e.inner)
    if isinstance(e, List):
        return "(" + " ".join(print_expr(i) for i in e.items) + ")"
    raise TypeError(f"not an expression: {e!r}")


def print_directive(d: Directive) -> str:
    if isinstance(d, Assume):
        return f"[ASSUME {d.name} {print_expr(d.body)}]"
    if isinstance(d, Observe):
        return f"[OBSERVE {print_expr(d.body)} {print_expr(d.value)}]"
    return f"[PREDICT {print_expr(d.body)}]"


def print_program(dirs: Sequence[Directive]) -> str:
    return "\n".join(print_directive(d) for d in dirs)
