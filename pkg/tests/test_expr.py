import math
import pickle

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mfpd.expr import (BinOp, Call, Expression, ExprSyntaxError, FUNCTIONS, Neg, Num, Var, count_calls, evaluate,
                       parse, to_text)

leaves = st.one_of(st.floats(0, 1e6, allow_nan=False).map(Num), st.sampled_from(["x", "y"]).map(Var))
trees = st.recursive(
    leaves,
    lambda kids: st.one_of(
        kids.map(Neg),
        st.tuples(st.sampled_from("+-*/^"), kids, kids).map(lambda t: BinOp(*t)),
        st.tuples(st.sampled_from(sorted(FUNCTIONS)), kids).map(lambda t: Call(*t)),
    ),
    max_leaves=12,
)


@given(trees)
def test_print_parse_round_trip(tree):
    assert parse(to_text(tree)) == tree


@given(trees)
def test_printed_text_is_a_fixed_point(tree):
    text = to_text(tree)
    assert to_text(parse(text)) == text


def test_exp_of_linear_has_one_call():
    tree = parse("exp(0.5*x)")
    assert tree == Call("exp", BinOp("*", Num(0.5), Var("x")))
    assert count_calls(tree) == 1


@pytest.mark.parametrize("text,expected", [
    ("1 + 2 * 3", 7.0),
    ("(1 + 2) * 3", 9.0),
    ("2 ^ 3 ^ 2", 512.0),
    ("-2 ^ 2", -4.0),
    ("8 / 4 / 2", 1.0),
    ("1 - 2 - 3", -4.0),
    ("sqrt(16) + log(exp(2)) + cos(0) + sin(0)", 7.0),
    ("1.5e1 + .5", 15.5),
    ("--3", 3.0),
])
def test_precedence_and_associativity(text, expected):
    assert float(evaluate(parse(text), 0.0, 0.0)) == pytest.approx(expected)


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_evaluation_matches_python(x, y):
    f = Expression("1 + 0.5*exp(x)*cos(y) - x^2/(2 + y)")
    assert float(f(x, y)) == pytest.approx(1 + 0.5 * math.exp(x) * math.cos(y) - x**2 / (2 + y), rel=1e-12, abs=1e-14)


def test_vectorized_evaluation_broadcasts():
    f = Expression("x + 0*y + 1")
    out = f(np.array([0.0, 1.0, 2.0]), 0.5)
    assert out.shape == (3,)
    assert np.allclose(out, [1, 2, 3])
    assert Expression("2")(np.zeros(4), np.zeros(4)).shape == (4,)


@pytest.mark.parametrize("text", ["", "x +", "(x", "x)", "foo(x)", "exp x", "1 $ 2", "x y", "exp()", "2..3"])
def test_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        parse(text)


def test_error_position():
    with pytest.raises(ExprSyntaxError) as exc:
        parse("x + * 2")
    assert exc.value.position == 4


def test_nodes_validate():
    with pytest.raises(ValueError):
        Num(-1.0)
    with pytest.raises(ValueError):
        Var("z")
    with pytest.raises(ValueError):
        Call("tan", Var("x"))
    with pytest.raises(ValueError):
        BinOp("%", Var("x"), Var("y"))


def test_expression_pickles_and_compares_by_text():
    f = Expression("exp(0.5*x) + y")
    g = pickle.loads(pickle.dumps(f))
    assert g == f
    assert g(0.2, 0.3) == pytest.approx(f(0.2, 0.3))
