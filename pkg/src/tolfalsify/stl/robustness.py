"""Quantitative (robustness) semantics over sampled traces.

Temporal operators take max/min over the samples whose time falls inside the
shifted interval, inclusive at both ends with a 1e-9 tolerance. Evaluation
is bottom-up and vectorized: each node produces its robustness signal only
for the sample indices its parent needs.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

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
    horizon,
)
from .trace import Trace

TIME_TOL = 1e-9


class TraceTooShortError(ValueError):
    pass


def interval_offsets(a: float, b: float, dt: float) -> tuple[int, int]:
    """Sample offsets ``(lo, hi)`` with ``a <= k*dt <= b`` (tolerance 1e-9).

    ``lo > hi`` means no sample falls inside the interval.
    """
    return math.ceil((a - TIME_TOL) / dt), math.floor((b + TIME_TOL) / dt)


def evaluate_expr(e: Expr, states: np.ndarray) -> np.ndarray:
    if isinstance(e, Const):
        return np.full(states.shape[0], e.value)
    if isinstance(e, Var):
        return states[:, e.index]
    if isinstance(e, Neg):
        return -evaluate_expr(e.arg, states)
    if isinstance(e, Abs):
        return np.abs(evaluate_expr(e.arg, states))
    left = evaluate_expr(e.left, states)
    right = evaluate_expr(e.right, states)
    if e.op == "+":
        return left + right
    if e.op == "-":
        return left - right
    if e.op == "*":
        return left * right
    if e.op == "/":
        return left / right
    raise ValueError(f"unknown operator {e.op!r}")


def _window_reduce(x: np.ndarray, lo: int, hi: int, n: int, fn, fill: float):
    if lo > hi:
        return np.full(n, fill)
    padded = np.full(n + hi, fill)
    m = min(len(x), n + hi)
    padded[:m] = x[:m]
    windows = sliding_window_view(padded, hi - lo + 1)[lo : lo + n]
    return fn(windows, axis=1)


def _signal(f: Formula, states: np.ndarray, dt: float, n: int) -> np.ndarray:
    """Robustness of ``f`` at sample indices ``0..n-1``."""
    total = states.shape[0]
    if isinstance(f, Predicate):
        return evaluate_expr(f.margin, states[:n])
    if isinstance(f, Not):
        return -_signal(f.arg, states, dt, n)
    if isinstance(f, And):
        return np.minimum.reduce([_signal(c, states, dt, n) for c in f.args])
    if isinstance(f, Or):
        return np.maximum.reduce([_signal(c, states, dt, n) for c in f.args])

    lo, hi = interval_offsets(f.a, f.b, dt)
    need = min(total, n + max(hi, 0))
    if isinstance(f, Always):
        inner = _signal(f.arg, states, dt, need)
        return _window_reduce(inner, lo, hi, n, np.min, np.inf)
    if isinstance(f, Eventually):
        inner = _signal(f.arg, states, dt, need)
        return _window_reduce(inner, lo, hi, n, np.max, -np.inf)
    if isinstance(f, Until):
        left = _signal(f.left, states, dt, need)
        right = _signal(f.right, states, dt, need)
        out = np.full(n, -np.inf)
        for k in range(n):
            last = min(k + hi, need - 1)
            if k + lo > last:
                continue
            prefix_min = np.minimum.accumulate(left[k : last + 1])
            out[k] = np.max(np.minimum(right[k + lo : last + 1], prefix_min[lo:]))
        return out
    raise TypeError(f"not a formula: {f!r}")


def robustness(f: Formula, trace: Trace, t: float = 0.0) -> float:
    """Robustness of ``f`` on ``trace`` at time ``t`` (a sample time).

    Raises ``TraceTooShortError`` if the trace ends before ``t + horizon(f)``.
    """
    j = int(round(t / trace.dt))
    if j < 0 or abs(j * trace.dt - t) > TIME_TOL:
        raise ValueError(f"t={t} is not on the sample grid (dt={trace.dt})")
    if t + horizon(f) > trace.duration + TIME_TOL:
        raise TraceTooShortError(
            f"trace lasts {trace.duration:g}s but the formula needs "
            f"{t + horizon(f):g}s from t={t:g}"
        )
    return float(_signal(f, trace.states, trace.dt, j + 1)[j])
