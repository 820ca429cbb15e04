import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stl_oracle import naive, random_formula
from tolfalsify.stl import (
    Abs,
    Always,
    And,
    BinOp,
    Const,
    Eventually,
    IntervalError,
    Not,
    Or,
    Predicate,
    STLSyntaxError,
    Trace,
    TraceTooShortError,
    UnknownSignalError,
    Until,
    Var,
    format_formula,
    horizon,
    parse_formula,
    robustness,
)

SCHEMA = {"x": 0, "y": 1, "v": 2, "a": 3, "b": 4, "s": 5}


def parse(text):
    return parse_formula(text, SCHEMA)


def test_parse_always_abs():
    f = parse("alw[0,10] (abs(y) < 0.3)")
    assert isinstance(f, Always) and (f.a, f.b) == (0, 10)
    assert f.arg == Predicate(Abs(Var("y", 1)), "<", Const(0.3))
    # normalized margin 0.3 - |y|
    tr = Trace(1.0, [[0, 0.1, 0, 0, 0, 0]] * 11)
    assert robustness(f, tr) == pytest.approx(0.2)


def test_parse_eventually():
    f = parse("ev[0,5] (v - 3 > 0)")
    assert isinstance(f, Eventually) and (f.a, f.b) == (0, 5)
    assert f.arg.lhs == BinOp("-", Var("v", 2), Const(3.0))


def test_parse_until_resolves_schema():
    f = parse("(a > 0) U[1,2] (b > 0)")
    assert isinstance(f, Until) and (f.a, f.b) == (1, 2)
    assert f.left.lhs == Var("a", 3)
    assert f.right.lhs == Var("b", 4)


def test_parse_operator_aliases():
    assert parse("x > 0 & y > 0") == parse("x > 0 and y > 0")
    assert parse("x > 0 | y > 0") == parse("x > 0 or y > 0")
    assert parse("!(x > 0)") == parse("not (x > 0)")


def test_precedence_and_binds_tighter_than_or():
    f = parse("x > 0 or y > 0 and v > 0")
    assert isinstance(f, Or)
    assert isinstance(f.args[1], And)


@pytest.mark.parametrize(
    "text",
    [
        "alw[0,10] (abs(y) < 0.3)",
        "ev[0,5] (v - 3 > 0)",
        "(a > 0) U[1,2] (b > 0)",
        "alw[0,4] (abs(x) < 2.4 and not (v >= -1.5 * y + 2))",
        "ev[0.5,2] alw[0,1] (x - y / 4 <= 0) or !(s > 0)",
    ],
)
def test_canonical_printer_round_trip(text):
    f = parse(text)
    printed = format_formula(f)
    assert parse(printed) == f
    assert format_formula(parse(printed)) == printed


def test_syntax_error_reports_position():
    with pytest.raises(STLSyntaxError) as err:
        parse("alw[0,1] (x > )")
    assert err.value.position == 14


def test_unknown_signal():
    with pytest.raises(UnknownSignalError):
        parse("alw[0,1] (speed > 0)")


@pytest.mark.parametrize("text", ["alw[2,1] (x > 0)", "ev[-1,2] (x > 0)"])
def test_bad_interval(text):
    with pytest.raises(IntervalError):
        parse(text)


def test_nonaffine_product_rejected():
    with pytest.raises(STLSyntaxError):
        parse("x * y > 0")


def test_horizon():
    assert horizon(parse("x > 0")) == 0
    assert horizon(parse("alw[0,10] (x > 0)")) == 10
    assert horizon(parse("alw[0,4] ev[0,3] (x > 0)")) == 7
    assert horizon(parse("(x > 0) U[1,2] ev[0,5] (y > 0)")) == 7


def test_horizon_is_exactly_what_evaluation_needs():
    f = parse("alw[0,4] ev[0,3] (x > 0)")
    rng = np.random.default_rng(0)
    ok = Trace(1.0, rng.normal(size=(8, 6)))
    robustness(f, ok)
    with pytest.raises(TraceTooShortError):
        robustness(f, Trace(1.0, rng.normal(size=(7, 6))))


def test_worked_margin_example():
    # s(t) = 5 against s - 3 > 0 gives margin 2
    f = parse("s - 3 > 0")
    tr = Trace(1.0, [[0, 0, 0, 0, 0, 5.0]])
    assert robustness(f, tr) == 2
    assert robustness(Not(f), tr) == -2


def test_always_is_min_over_window():
    f = Always(0, 2, Predicate(Var("x", 0), ">", Const(0.0)))
    assert robustness(f, Trace(1.0, [[3.0], [1.0], [2.0]])) == 1.0


def test_until_worked_example():
    f = Until(0, 2, Predicate(Var("a", 0), ">", Const(0.0)), Predicate(Var("b", 1), ">", Const(0.0)))
    tr = Trace(1.0, np.array([[1, 2, 0.5], [-1, 0.5, 3]]).T)
    assert robustness(f, tr) == 0.5


def test_evaluation_at_later_time():
    f = Eventually(1, 2, Predicate(Var("x", 0), ">", Const(0.0)))
    tr = Trace(0.5, [[0.0], [1.0], [5.0], [2.0], [-1.0], [7.0], [0.0]])
    # t = 1.0 is sample 2; window [2, 3] in time = samples 4..6
    assert robustness(f, tr, 1.0) == 7.0
    with pytest.raises(ValueError):
        robustness(f, tr, 0.3)


def test_interval_boundaries_tolerate_rounding():
    # 0.1 * 3 is not exactly 0.3 in floating point
    f = Always(0, 0.3, Predicate(Var("x", 0), ">", Const(0.0)))
    tr = Trace(0.1, [[5.0], [5.0], [5.0], [-1.0]])
    assert robustness(f, tr) == -1.0


def test_matches_naive_evaluator_small_sample():
    rng = np.random.default_rng(11)
    for _ in range(150):
        f = random_formula(rng, 3, int(rng.integers(1, 5)), max_width=4, dt=0.5)
        n = int(horizon(f) / 0.5) + 1 + int(rng.integers(0, 4))
        x = rng.normal(size=(n, 3))
        assert robustness(f, Trace(0.5, x)) == pytest.approx(naive(f, x, 0.5), abs=1e-9)


formulas = st.integers(0, 2**32 - 1).map(
    lambda s: random_formula(np.random.default_rng(s), 2, 3, max_width=3)
)
traces = st.integers(0, 2**32 - 1).map(lambda s: np.random.default_rng(s).normal(size=(16, 2)))


@settings(max_examples=200, deadline=None)
@given(formulas, traces)
def test_negation_antisymmetry(f, x):
    tr = Trace(1.0, x)
    assert robustness(Not(f), tr) == -robustness(f, tr)


@settings(max_examples=200, deadline=None)
@given(formulas, formulas, traces)
def test_conjunction_is_min_disjunction_is_max(f, g, x):
    tr = Trace(1.0, x)
    rf, rg = robustness(f, tr), robustness(g, tr)
    assert robustness(And((f, g)), tr) == min(rf, rg)
    assert robustness(Or((f, g)), tr) == max(rf, rg)


@settings(max_examples=200, deadline=None)
@given(formulas, traces, st.integers(0, 3), st.integers(0, 3))
def test_always_eventually_duality(f, x, a, w):
    tr = Trace(1.0, x)
    lhs = robustness(Always(a, a + w, f), tr)
    rhs = robustness(Not(Eventually(a, a + w, Not(f))), tr)
    assert abs(lhs - rhs) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 10.0))
def test_shift_monotonicity(seed, c):
    rng = np.random.default_rng(seed)
    f = random_formula(rng, 1, 4, max_width=3, negation=False)
    # rebuild every predicate as (s0 - k > 0)
    f = _as_threshold_formula(f)
    x = rng.normal(size=(12, 1))
    base = robustness(f, Trace(1.0, x))
    shifted = robustness(f, Trace(1.0, x + c))
    assert shifted - base == pytest.approx(c, abs=1e-9)


def _as_threshold_formula(f):
    if isinstance(f, Predicate):
        k = len(repr(f)) % 7 / 7.0
        return Predicate(BinOp("-", Var("s0", 0), Const(k)), ">", Const(0.0))
    if isinstance(f, (And, Or)):
        return type(f)(tuple(_as_threshold_formula(c) for c in f.args))
    if isinstance(f, (Always, Eventually)):
        return type(f)(f.a, f.b, _as_threshold_formula(f.arg))
    if isinstance(f, Until):
        return Until(f.a, f.b, _as_threshold_formula(f.left), _as_threshold_formula(f.right))
    raise TypeError(f)


def test_trace_validation():
    with pytest.raises(ValueError):
        Trace(0.0, [[1.0]])
    with pytest.raises(ValueError):
        Trace(1.0, [[1.0], [2.0]], actions=[[0.0], [0.0]])
    tr = Trace(0.5, [[1.0, 2.0], [3.0, 4.0]], actions=[[0.1]])
    assert len(tr) == 2 and tr.duration == 0.5
    assert tr.padded_states(4).tolist() == [[1, 2], [3, 4], [3, 4], [3, 4]]
    with pytest.raises(ValueError):
        tr.states[0, 0] = 9.0


def test_empty_window_conventions():
    f = Always(0, 0.4, Predicate(Var("x", 0), ">", Const(0.0)))
    tr = Trace(1.0, [[-3.0], [5.0]])
    # only sample 0 lies in [0, 0.4]
    assert robustness(f, tr) == -3.0
    g = Eventually(0.2, 0.4, Predicate(Var("x", 0), ">", Const(0.0)))
    assert robustness(g, Trace(1.0, [[1.0], [1.0]])) == -math.inf
