"""STL abstract syntax.

Formulas are immutable trees of frozen dataclasses. Predicates keep the
comparison exactly as written (``lhs op rhs``) so that printing and re-parsing
is lossless; ``Predicate.margin`` gives the normalized ``mu(s) > 0`` form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

# ---------------------------------------------------------------------------
# Arithmetic expressions over signal components
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str
    index: int


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Abs:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, Neg, Abs, BinOp]


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------

COMPARISONS = ("<", "<=", ">", ">=")


@dataclass(frozen=True)
class Predicate:
    lhs: Expr
    op: str
    rhs: Expr

    def __post_init__(self):
        if self.op not in COMPARISONS:
            raise ValueError(f"unsupported comparison {self.op!r}")

    @property
    def margin(self) -> Expr:
        """Expression ``mu`` such that the predicate reads ``mu(s) > 0``."""
        if self.op in (">", ">="):
            return BinOp("-", self.lhs, self.rhs)
        return BinOp("-", self.rhs, self.lhs)


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    args: Tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    args: Tuple["Formula", ...]


def _check_interval(a: float, b: float) -> None:
    if not (0.0 <= a <= b < float("inf")):
        raise ValueError(f"invalid interval [{a}, {b}]: need 0 <= a <= b < inf")


@dataclass(frozen=True)
class Always:
    a: float
    b: float
    arg: "Formula"

    def __post_init__(self):
        _check_interval(self.a, self.b)


@dataclass(frozen=True)
class Eventually:
    a: float
    b: float
    arg: "Formula"

    def __post_init__(self):
        _check_interval(self.a, self.b)


@dataclass(frozen=True)
class Until:
    a: float
    b: float
    left: "Formula"
    right: "Formula"

    def __post_init__(self):
        _check_interval(self.a, self.b)


Formula = Union[Predicate, Not, And, Or, Always, Eventually, Until]


def children(f: Formula) -> Tuple[Formula, ...]:
    if isinstance(f, Predicate):
        return ()
    if isinstance(f, (Not, Always, Eventually)):
        return (f.arg,)
    if isinstance(f, (And, Or)):
        return f.args
    if isinstance(f, Until):
        return (f.left, f.right)
    raise TypeError(f"not a formula: {f!r}")


def horizon(f: Formula) -> float:
    """Trace duration needed to evaluate ``f`` at time 0.

    This is the largest sum of interval upper bounds along any root-to-leaf
    path of the tree.
    """
    below = max((horizon(c) for c in children(f)), default=0.0)
    if isinstance(f, (Always, Eventually, Until)):
        return f.b + below
    return below


def depth(f: Formula) -> int:
    return 1 + max((depth(c) for c in children(f)), default=0)


# ---------------------------------------------------------------------------
# Canonical printer
# ---------------------------------------------------------------------------


def _num(x: float) -> str:
    return repr(float(x))


def format_expr(e: Expr) -> str:
    if isinstance(e, Const):
        return _num(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"-({format_expr(e.arg)})"
    if isinstance(e, Abs):
        return f"abs({format_expr(e.arg)})"
    if isinstance(e, BinOp):
        return f"({format_expr(e.left)} {e.op} {format_expr(e.right)})"
    raise TypeError(f"not an expression: {e!r}")


def format_formula(f: Formula) -> str:
    """Print ``f`` in the concrete syntax accepted by ``parse_formula``."""
    if isinstance(f, Predicate):
        return f"({format_expr(f.lhs)} {f.op} {format_expr(f.rhs)})"
    if isinstance(f, Not):
        return f"not {format_formula(f.arg)}"
    if isinstance(f, And):
        return "(" + " and ".join(format_formula(c) for c in f.args) + ")"
    if isinstance(f, Or):
        return "(" + " or ".join(format_formula(c) for c in f.args) + ")"
    if isinstance(f, Always):
        return f"alw[{_num(f.a)},{_num(f.b)}] {format_formula(f.arg)}"
    if isinstance(f, Eventually):
        return f"ev[{_num(f.a)},{_num(f.b)}] {format_formula(f.arg)}"
    if isinstance(f, Until):
        return (
            f"({format_formula(f.left)} U[{_num(f.a)},{_num(f.b)}] "
            f"{format_formula(f.right)})"
        )
    raise TypeError(f"not a formula: {f!r}")
