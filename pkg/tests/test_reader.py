import math

import pytest
from hypothesis import given, strategies as st

from probprog.reader import (Assume, BoolLit, IntLit, List, Observe, Predict, Quote, ReaderError,
                             RealLit, Symbol, format_real, parse_expr, parse_program, print_expr,
                             print_program)


def L(*items):
    return List(tuple(items))


def test_assume_bernoulli():
    assert parse_program("[ASSUME a (bernoulli 0.7)]") == [
        Assume("a", L(Symbol("bernoulli"), RealLit(0.7)))]


def test_empty_program():
    assert parse_program("") == []
    assert parse_program("  ; only a comment\n") == []


def test_predict_sum():
    assert parse_program("[PREDICT (+ 1 2)]") == [Predict(L(Symbol("+"), IntLit(1), IntLit(2)))]


def test_observe_and_order():
    dirs = parse_program("[ASSUME x (normal 0 1)]\n[OBSERVE (normal x 1) 2.5]\n[PREDICT x]")
    assert [type(d) for d in dirs] == [Assume, Observe, Predict]
    assert dirs[1].value == RealLit(2.5)


@pytest.mark.parametrize("text,expected", [
    ("(lambda (p) p)", L(Symbol("lambda"), L(Symbol("p")), Symbol("p"))),
    ("(normal 1 10)", L(Symbol("normal"), IntLit(1), IntLit(10))),
    ("'real", Quote(Symbol("real"))),
    ("`real", Quote(Symbol("real"))),
    ("  ( +   1\n 2 )  ", L(Symbol("+"), IntLit(1), IntLit(2))),
    ("true", BoolLit(True)),
    ("1e3", RealLit(1000.0)),
])
def test_parse_expr(text, expected):
    assert parse_expr(text) == expected


@pytest.mark.parametrize("e,text", [
    (L(Symbol("+"), IntLit(1), IntLit(2)), "(+ 1 2)"),
    (Quote(Symbol("bool")), "'bool"),
    (RealLit(0.5), "0.5"),
    (RealLit(3.0), "3.0"),
])
def test_print_expr(e, text):
    assert print_expr(e) == text


def test_identifier_characters():
    for name in ["uniform-continuous", "safe-div", "wet-grass", "null?", "a_b", "<=", "*"]:
        assert parse_expr(name) == Symbol(name)


@pytest.mark.parametrize("text,line,col", [
    ("[ASSUME a (normal 0 1]", 1, None),
    ("[PREDICT\n  (+ 1 2]", 2, None),
    ("[PREDICT (+ 1 2)", 1, None),
])
def test_unbalanced_reports_position(text, line, col):
    with pytest.raises(ReaderError) as err:
        parse_program(text)
    assert err.value.line >= line
    assert "line" in str(err.value)


def test_unknown_directive_named():
    with pytest.raises(ReaderError, match="SAMPLE"):
        parse_program("[SAMPLE x]")


def test_trailing_tokens_rejected():
    with pytest.raises(ReaderError):
        parse_expr("(+ 1 2) 3")


def test_observe_value_must_be_constant():
    with pytest.raises(ReaderError):
        parse_program("[OBSERVE (normal 0 1) x]")


# -- round trips -----------------------------------------------------------------------

_names = st.from_regex(r"[a-z][a-z0-9\-_?*<=]{0,8}", fullmatch=True).filter(
    lambda s: s not in ("true", "false"))
_reals = st.floats(allow_nan=False, allow_infinity=False)
_atoms = st.one_of(
    _reals.map(RealLit),
    st.integers(-10**12, 10**12).map(IntLit),
    st.booleans().map(BoolLit),
    _names.map(Symbol),
)


def _grow(children):
    return st.one_of(
        st.lists(children, max_size=5).map(lambda xs: List(tuple(xs))),
        children.map(Quote),
    )


exprs = st.recursive(_atoms, _grow, max_leaves=40)


@given(exprs)
def test_print_parse_round_trip(e):
    assert parse_expr(print_expr(e)) == e


@given(_reals)
def test_reals_bit_exact(x):
    back = parse_expr(format_real(x))
    assert isinstance(back, RealLit)
    assert back.value == x and math.copysign(1, back.value) == math.copysign(1, x)


@given(st.lists(st.tuples(_names, exprs), max_size=4), st.lists(exprs, max_size=3))
def test_program_round_trip(assumes, predicts):
    dirs = [Assume(n, e) for n, e in assumes] + [Predict(e) for e in predicts]
    assert parse_program(print_program(dirs)) == dirs
