"""Recursive-descent parser for the STL concrete syntax.

Grammar (EBNF)::

    formula    = until ;
    until      = disj [ "U" interval until ] ;
    disj       = conj { ( "or" | "|" ) conj } ;
    conj       = unary { ( "and" | "&" ) unary } ;
    unary      = ( "not" | "!" ) unary
               | "alw" interval unary
               | "ev" interval unary
               | atom ;
    atom       = "(" formula ")" | comparison ;
    comparison = expr ( "<" | "<=" | ">" | ">=" ) expr ;
    expr       = term { ( "+" | "-" ) term } ;
    term       = factor { ( "*" | "/" ) factor } ;
    factor     = number | name | "abs" "(" expr ")" | "(" expr ")" | "-" factor ;
    interval   = "[" number "," number "]" ;

Products and quotients must keep the expression affine in the signals, so
one operand of ``*`` and the divisor of ``/`` must be constant.
"""

from __future__ import annotations

import re
from typing import List, Mapping, NamedTuple, Optional

from .formula import (
    Abs,
    Always,
    And,
    BinOp,
    Const,
    Eventually,
    Expr,
    Formula,
    Neg,
    Not,
    Or,
    Predicate,
    Until,
    Var,
)


class STLSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownSignalError(STLSyntaxError):
    pass


class IntervalError(STLSyntaxError):
    pass


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|[<>()\[\],+\-*/&|!])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"alw", "ev", "U", "and", "or", "not", "abs"}


class Token(NamedTuple):
    kind: str  # num, name, kw, op, end
    text: str
    pos: int


def tokenize(text: str) -> List[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise STLSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            word = m.group()
            if kind == "name" and word in _KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, word, pos))
        pos = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


def _is_const(e: Expr) -> bool:
    if isinstance(e, Const):
        return True
    if isinstance(e, Var):
        return False
    if isinstance(e, (Neg, Abs)):
        return _is_const(e.arg)
    return _is_const(e.left) and _is_const(e.right)


class _Parser:
    def __init__(self, text: str, schema: Mapping[str, int]):
        self.tokens = tokenize(text)
        self.schema = schema
        self.i = 0

    # -- token helpers ------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def accept(self, *texts: str) -> Optional[Token]:
        t = self.tok
        if t.kind in ("op", "kw") and t.text in texts:
            self.i += 1
            return t
        return None

    def expect(self, text: str) -> Token:
        t = self.accept(text)
        if t is None:
            found = self.tok.text or "end of input"
            raise STLSyntaxError(f"expected {text!r}, found {found!r}", self.tok.pos)
        return t

    # -- formulas -------------------------------------------------------------

    def parse(self) -> Formula:
        f = self.until()
        if self.tok.kind != "end":
            raise STLSyntaxError(f"unexpected {self.tok.text!r}", self.tok.pos)
        return f

    def until(self) -> Formula:
        left = self.disj()
        if self.accept("U"):
            a, b = self.interval()
            right = self.until()
            return Until(a, b, left, right)
        return left

    def disj(self) -> Formula:
        args = [self.conj()]
        while self.accept("or", "|"):
            args.append(self.conj())
        return args[0] if len(args) == 1 else Or(tuple(args))

    def conj(self) -> Formula:
        args = [self.unary()]
        while self.accept("and", "&"):
            args.append(self.unary())
        return args[0] if len(args) == 1 else And(tuple(args))

    def unary(self) -> Formula:
        if self.accept("not", "!"):
            return Not(self.unary())
        if self.accept("alw"):
            a, b = self.interval()
            return Always(a, b, self.unary())
        if self.accept("ev"):
            a, b = self.interval()
            return Eventually(a, b, self.unary())
        return self.atom()

    def atom(self) -> Formula:
        if self.tok.text == "(" and self.tok.kind == "op":
            # '(' opens either a sub-formula or an arithmetic group; try the
            # formula reading first and fall back to a comparison.
            start = self.i
            self.i += 1
            try:
                f = self.until()
                self.expect(")")
                return f
            except STLSyntaxError as err:
                if isinstance(err, (UnknownSignalError, IntervalError)):
                    raise
                self.i = start
                try:
                    return self.comparison()
                except STLSyntaxError as err2:
                    # report whichever reading got further into the text
                    raise err2 if err2.position > err.position else err from None
        return self.comparison()

    def comparison(self) -> Predicate:
        lhs = self.expr()
        t = self.accept("<", "<=", ">", ">=")
        if t is None:
            found = self.tok.text or "end of input"
            raise STLSyntaxError(f"expected comparison, found {found!r}", self.tok.pos)
        rhs = self.expr()
        return Predicate(lhs, t.text, rhs)

    def interval(self):
        self.expect("[")
        pos = self.tok.pos
        a = self.signed_number()
        self.expect(",")
        b = self.signed_number()
        self.expect("]")
        if a < 0 or b < 0:
            raise IntervalError(f"negative interval bound in [{a}, {b}]", pos)
        if a > b:
            raise IntervalError(f"inverted interval [{a}, {b}]", pos)
        return a, b

    def signed_number(self) -> float:
        sign = -1.0 if self.accept("-") else 1.0
        t = self.tok
        if t.kind != "num":
            raise STLSyntaxError(f"expected number, found {t.text!r}", t.pos)
        self.i += 1
        return sign * float(t.text)

    # -- arithmetic -----------------------------------------------------------

    def expr(self) -> Expr:
        e = self.term()
        while True:
            t = self.accept("+", "-")
            if t is None:
                return e
            e = BinOp(t.text, e, self.term())

    def term(self) -> Expr:
        e = self.factor()
        while True:
            t = self.accept("*", "/")
            if t is None:
                return e
            rhs = self.factor()
            if t.text == "*" and not (_is_const(e) or _is_const(rhs)):
                raise STLSyntaxError("product of two signal expressions", t.pos)
            if t.text == "/" and not _is_const(rhs):
                raise STLSyntaxError("division by a signal expression", t.pos)
            e = BinOp(t.text, e, rhs)

    def factor(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Const(float(t.text))
        if t.kind == "name":
            self.i += 1
            if t.text not in self.schema:
                raise UnknownSignalError(f"unknown signal {t.text!r}", t.pos)
            return Var(t.text, int(self.schema[t.text]))
        if self.accept("abs"):
            self.expect("(")
            e = self.expr()
            self.expect(")")
            return Abs(e)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("-"):
            arg = self.factor()
            if isinstance(arg, Const):
                return Const(-arg.value)
            return Neg(arg)
        found = t.text or "end of input"
        raise STLSyntaxError(f"expected expression, found {found!r}", t.pos)


def parse_formula(text: str, schema: Mapping[str, int]) -> Formula:
    """Parse ``text`` into a formula whose variables index into ``schema``.

    Raises ``STLSyntaxError`` (with ``.position``) on malformed input,
    ``UnknownSignalError`` for names missing from ``schema`` and
    ``IntervalError`` for negative or inverted intervals.
    """
    return _Parser(text, schema).parse()
