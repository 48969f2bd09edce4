import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import close, expr_st, interpret, to_tree
from simreg.expr import (
    BINARY_OPS,
    CONSTANT_POOL,
    UNARY_OPS,
    Binary,
    BinaryOp,
    Const,
    NamedConstant,
    ParseError,
    Unary,
    UnaryOp,
    Var,
    canonical_key,
    complexity,
    depth,
    free_variables,
    parse,
    render,
    simplify,
    size,
    subexpressions,
    substitute,
    truncate,
)

x, y, z = Var("x"), Var("y"), Var("z")


def add(a, b):
    return Binary(BinaryOp.ADD, a, b)


def mul(a, b):
    return Binary(BinaryOp.MUL, a, b)


def test_vocabulary_sizes():
    assert len(UNARY_OPS) == 11
    assert len(BINARY_OPS) == 7
    assert len(CONSTANT_POOL) == 29
    assert len(set(CONSTANT_POOL)) == 29
    ints = [c for c in CONSTANT_POOL if c.is_rational and c.value.denominator == 1]
    assert sorted(c.value for c in ints) == list(range(-10, 11))


def test_depth_examples():
    assert depth(x) == 1
    assert depth(Unary(UnaryOp.SIN, x)) == 2
    assert depth(add(mul(x, x), mul(Const(10), x))) == 3


def test_size_examples():
    assert size(Const(5)) == 1
    assert size(add(x, y)) == 3
    assert size(add(mul(x, x), mul(Const(10), x))) == 7


def test_subexpressions_examples():
    s = Unary(UnaryOp.SIN, x)
    assert subexpressions(x) == (x,)
    assert subexpressions(s) == (s, x)
    e = add(x, Const(2))
    assert subexpressions(e) == (e, x, Const(2))


def test_substitute_examples():
    assert substitute(add(x, y), y, Const(0)) == add(x, Const(0))
    assert substitute(Unary(UnaryOp.SIN, x), x, mul(x, x)) == Unary(UnaryOp.SIN, mul(x, x))
    assert substitute(x, y, z) is x


def test_truncate_examples():
    assert truncate(x, 1) == x
    ss = Unary(UnaryOp.SIN, Unary(UnaryOp.SIN, x))
    assert truncate(ss, 3) == ss
    sss = Unary(UnaryOp.SIN, ss)
    t = truncate(sss, 2)
    assert depth(t) <= 2
    assert t == Unary(UnaryOp.SIN, x)
    assert truncate(add(Unary(UnaryOp.COS, y), x), 1) == x
    with pytest.raises(ValueError):
        truncate(x, 0)


def test_free_variables_examples():
    assert free_variables(Const(3)) == frozenset()
    assert free_variables(add(x, Unary(UnaryOp.SIN, y))) == {"x", "y"}
    assert free_variables(mul(x, x)) == {"x"}


def test_simplify_examples():
    assert simplify(add(x, Const(0))) == x
    assert simplify(mul(Const(2), Const(3))) == Const(6)
    assert simplify(Unary(UnaryOp.SIN, x)) == Unary(UnaryOp.SIN, x)
    assert simplify(mul(x, Const(0))) == Const(0)
    assert simplify(mul(Const(1), x)) == x
    neg = lambda e: Binary(BinaryOp.SUB, Const(0), e)
    assert simplify(neg(neg(x))) == x
    assert simplify(add(y, x)) == add(x, y)
    # division by an exact zero is left alone
    assert simplify(Binary(BinaryOp.DIV, Const(1), Const(0))) == Binary(BinaryOp.DIV, Const(1), Const(0))


def test_complexity_counts_operators():
    assert complexity(x) == 0
    assert complexity(add(x, Const(10))) == 1
    assert complexity(Unary(UnaryOp.SIN, add(x, y))) == 2


def test_constants_are_exact():
    assert Const(0.5) == Const(Fraction(1, 2))
    assert render(Const(Fraction(-7, 4))) == "-7/4"
    assert render(Const(NamedConstant.PI)) == "pi"
    assert Const(NamedConstant.SQRT2).numeric == pytest.approx(math.sqrt(2))
    with pytest.raises(ValueError):
        Const(float("inf"))


def test_immutable():
    with pytest.raises(AttributeError):
        x.name = "y"
    e = add(x, y)
    with pytest.raises(AttributeError):
        e.left = z


def test_invalid_variable_names():
    for bad in ("", "1x", "a b", "Sin", "pi"):
        with pytest.raises(ValueError):
            Var(bad)


def test_parse_infix_and_aliases():
    assert parse("x + 2*y") == add(x, mul(Const(2), y))
    assert parse("sin(x)") == Unary(UnaryOp.SIN, x)
    assert parse("exp(x)") == Unary(UnaryOp.EXP, x)
    assert parse("x^2 + 1") == add(Binary(BinaryOp.POW, x, Const(2)), Const(1))
    assert parse("-3/4") == Const(Fraction(-3, 4))
    assert parse("-x") == mul(Const(-1), x)
    assert parse("x - y") == Binary(BinaryOp.SUB, x, y)


@pytest.mark.parametrize("text", ["x +", "foo(x)", "Sin(x, y)", "x[0]", "lambda: 1", "x < y"])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse(text)


@given(expr_st)
def test_depth_at_most_size(e):
    assert depth(e) <= size(e)


@given(expr_st)
def test_subexpressions_length_and_head(e):
    subs = subexpressions(e)
    assert len(subs) == size(e)
    assert subs[0] == e


@given(expr_st, expr_st, expr_st)
def test_substitute_idempotent(e, t, r):
    if any(s == t for s in subexpressions(r)):
        return
    once = substitute(e, t, r)
    assert substitute(once, t, r) == once


@given(expr_st, st.integers(min_value=1, max_value=6))
def test_truncate_respects_bound(e, d):
    t = truncate(e, d)
    assert depth(t) <= d
    if depth(e) <= d:
        assert t == e


@given(expr_st)
def test_render_parse_round_trip(e):
    assert parse(render(e)) == e


@given(expr_st, expr_st)
def test_render_injective(a, b):
    assert (render(a) == render(b)) == (a == b)


@given(expr_st)
def test_canonical_key_ignores_commutative_order(e):
    if isinstance(e, Binary) and e.op in (BinaryOp.ADD, BinaryOp.MUL):
        swapped = Binary(e.op, e.right, e.left)
        assert canonical_key(swapped) == canonical_key(e)


def test_simplify_preserves_value_on_random_expressions():
    rng = np.random.default_rng(123)
    from helpers import random_expr

    checked = 0
    for _ in range(1000):
        e = random_expr(rng, 5, ("x", "y"))
        s = simplify(e)
        env = {"x": rng.uniform(-5, 5), "y": rng.uniform(-5, 5)}
        a = interpret(to_tree(render(e)), env)
        b = interpret(to_tree(render(s)), env)
        if math.isfinite(a) and math.isfinite(b):
            assert close(a, b), (render(e), render(s), env, a, b)
            checked += 1
    assert checked > 500
