"""Signal temporal logic: syntax, parsing and robustness over traces."""

from .formula import (
    Abs,
    Always,
    And,
    BinOp,
    Const,
    Eventually,
    Formula,
    Neg,
    Not,
    Or,
    Predicate,
    Until,
    Var,
    format_formula,
    horizon,
)
from .parser import IntervalError, STLSyntaxError, UnknownSignalError, parse_formula
from .robustness import TraceTooShortError, robustness
from .trace import Trace

__all__ = [
    "Abs",
    "Always",
    "And",
    "BinOp",
    "Const",
    "Eventually",
    "Formula",
    "IntervalError",
    "Neg",
    "Not",
    "Or",
    "Predicate",
    "STLSyntaxError",
    "Trace",
    "TraceTooShortError",
    "UnknownSignalError",
    "Until",
    "Var",
    "format_formula",
    "horizon",
    "parse_formula",
    "robustness",
]
