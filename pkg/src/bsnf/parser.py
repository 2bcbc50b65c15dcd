"""Recursive-descent parser for the concrete formula grammar.

Grammar (loosest to tightest binding):

    iff     := implies ('<->' implies)*
    implies := or ('->' implies)?           right associative
    or      := and ('|' and)*
    and     := unary ('&' unary)*
    unary   := '~' unary | quantified | primary
    quantified := ('exists' | 'forall' | 'exists>=K' | 'exists=K') ident '.' iff
    primary := '(' iff ')' | 'dist<=K' '(' ident ',' ident ')'
             | ident '(' ident (',' ident)* ')' | ident '=' ident

Quantifier bodies extend as far right as possible.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError
from .syntax import (
    And,
    Count,
    DistAtom,
    Eq,
    Exists,
    Forall,
    Formula,
    Iff,
    Implies,
    Not,
    Or,
    Rel,
)

_TOKEN = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
    | (?P<op><->|->|<=|>=|[~&|().,=])
    | (?P<number>\d+)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # 'ident' | 'op' | 'number' | 'counting' | 'dist' | 'end'
    text: str
    value: object
    line: int
    column: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    line, col = 1, 1
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        lexeme = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, lexeme, None, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    toks.append(_Tok("end", "", None, line, col))
    return _merge_composites(toks)


def _merge_composites(toks: list[_Tok]) -> list[_Tok]:
    """Fuse 'exists>=K', 'exists=K' and 'dist<=K' into single tokens."""
    out: list[_Tok] = []
    i = 0
    while i < len(toks):
        t = toks[i]
        if (
            t.kind == "ident"
            and t.text == "exists"
            and i + 2 < len(toks)
            and toks[i + 1].kind == "op"
            and toks[i + 1].text in (">=", "=")
            and toks[i + 2].kind == "number"
        ):
            mode = toks[i + 1].text
            k = int(toks[i + 2].text)
            out.append(_Tok("counting", f"exists{mode}{k}", (mode, k), t.line, t.column))
            i += 3
            continue
        if (
            t.kind == "ident"
            and t.text == "dist"
            and i + 2 < len(toks)
            and toks[i + 1].kind == "op"
            and toks[i + 1].text == "<="
            and toks[i + 2].kind == "number"
        ):
            out.append(_Tok("dist", f"dist<={toks[i + 2].text}", int(toks[i + 2].text), t.line, t.column))
            i += 3
            continue
        out.append(t)
        i += 1
    return out


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.pos = 0

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def advance(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str, text: str | None = None) -> _Tok:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            raise ParseError(f"expected {want!r}, found {t.text or 'end of input'!r}", t.line, t.column)
        return self.advance()

    def fail(self, msg: str) -> ParseError:
        t = self.peek()
        return ParseError(msg, t.line, t.column)

    # precedence ladder --------------------------------------------------

    def parse_formula(self) -> Formula:
        left = self.parse_implies()
        while self.peek().kind == "op" and self.peek().text == "<->":
            self.advance()
            left = Iff(left, self.parse_implies())
        return left

    def parse_implies(self) -> Formula:
        left = self.parse_or()
        if self.peek().kind == "op" and self.peek().text == "->":
            self.advance()
            return Implies(left, self.parse_implies())
        return left

    def parse_or(self) -> Formula:
        left = self.parse_and()
        while self.peek().kind == "op" and self.peek().text == "|":
            self.advance()
            left = Or(left, self.parse_and())
        return left

    def parse_and(self) -> Formula:
        left = self.parse_unary()
        while self.peek().kind == "op" and self.peek().text == "&":
            self.advance()
            left = And(left, self.parse_unary())
        return left

    def parse_unary(self) -> Formula:
        t = self.peek()
        if t.kind == "op" and t.text == "~":
            self.advance()
            return Not(self.parse_unary())
        if t.kind == "counting":
            self.advance()
            mode, k = t.value
            var = self.expect("ident").text
            self.expect("op", ".")
            return Count(mode, k, var, self.parse_formula())
        if t.kind == "ident" and t.text in ("exists", "forall"):
            self.advance()
            var = self.expect("ident").text
            self.expect("op", ".")
            body = self.parse_formula()
            return Exists(var, body) if t.text == "exists" else Forall(var, body)
        return self.parse_primary()

    def parse_primary(self) -> Formula:
        t = self.peek()
        if t.kind == "op" and t.text == "(":
            self.advance()
            inner = self.parse_formula()
            self.expect("op", ")")
            return inner
        if t.kind == "dist":
            self.advance()
            self.expect("op", "(")
            a = self.expect("ident").text
            self.expect("op", ",")
            b = self.expect("ident").text
            self.expect("op", ")")
            return DistAtom(t.value, a, b)
        if t.kind == "ident":
            name = self.advance().text
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text == "(":
                self.advance()
                args = [self.expect("ident").text]
                while self.peek().kind == "op" and self.peek().text == ",":
                    self.advance()
                    args.append(self.expect("ident").text)
                self.expect("op", ")")
                return Rel(name, tuple(args))
            if nxt.kind == "op" and nxt.text == "=":
                self.advance()
                other = self.expect("ident").text
                return Eq(name, other)
            raise self.fail(f"expected '(' or '=' after identifier {name!r}")
        raise self.fail(f"expected a formula, found {t.text or 'end of input'!r}")


def parse(text: str) -> Formula:
    """Parse concrete syntax into a formula AST."""
    parser = _Parser(_tokenize(text))
    phi = parser.parse_formula()
    tail = parser.peek()
    if tail.kind != "end":
        raise ParseError(f"unexpected trailing input {tail.text!r}", tail.line, tail.column)
    return phi
