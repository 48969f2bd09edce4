"""Independent oracles and random expression builders shared by the tests."""

from __future__ import annotations

import math
import re

import numpy as np
from hypothesis import strategies as st

from simreg.expr import BINARY_OPS, CONSTANT_POOL, UNARY_OPS, Binary, Expr, Unary, Var

# --- random expressions ------------------------------------------------------


def random_expr(rng: np.random.Generator, max_depth: int, names=("x", "y")) -> Expr:
    leaves = [Var(n) for n in names] + list(CONSTANT_POOL)
    if max_depth <= 1 or rng.random() < 0.25:
        return leaves[rng.integers(len(leaves))]
    if rng.random() < 0.4:
        return Unary(UNARY_OPS[rng.integers(len(UNARY_OPS))], random_expr(rng, max_depth - 1, names))
    op = BINARY_OPS[rng.integers(len(BINARY_OPS))]
    return Binary(op, random_expr(rng, max_depth - 1, names), random_expr(rng, max_depth - 1, names))


leaf_st = st.one_of(st.sampled_from([Var("x"), Var("y"), Var("z")]), st.sampled_from(CONSTANT_POOL))


def _extend(children):
    return st.one_of(
        st.builds(Unary, st.sampled_from(UNARY_OPS), children),
        st.builds(Binary, st.sampled_from(BINARY_OPS), children, children),
    )


expr_st = st.recursive(leaf_st, _extend, max_leaves=12)


# --- scalar interpreter -------------------------------------------------------
# Written against the math module, one float at a time, sharing nothing with
# the vectorized evaluator beyond the operator names.

EPS = 1e-10
GUARD = 1e-12


def _clip(v, lo, hi):
    return lo if v < lo else hi if v > hi else v


def _pow(a, b):
    a = abs(a)
    if a == 0.0:
        return math.inf if b < 0 else (1.0 if b == 0 else 0.0)
    try:
        return math.pow(a, b)
    except OverflowError:
        return math.inf


def _exp_safe(v):
    a = abs(v)
    return math.exp(a / (a + 1.0))  # inf/inf is nan, as in IEEE arithmetic


def _div(a, b):
    if abs(b) < GUARD:
        b = GUARD
    try:
        return a / b
    except ZeroDivisionError:
        return math.nan


def _wrap(fn):
    def g(*args):
        if any(math.isnan(a) for a in args):
            return math.nan
        try:
            return fn(*args)
        except OverflowError:
            return math.inf
        except ValueError:
            return math.nan
    return g


SCALAR = {
    "Sin": _wrap(math.sin),
    "Cos": _wrap(math.cos),
    "SafeExp": _wrap(_exp_safe),
    "SafeLog": _wrap(lambda v: math.log(abs(v) + EPS)),
    "SafeSqrt": _wrap(lambda v: math.sqrt(abs(v))),
    "SafeAtan": _wrap(math.atan),
    "SafeAcos": _wrap(lambda v: math.acos(_clip(v, -1.0, 1.0))),
    "SafeAsin": _wrap(lambda v: math.asin(_clip(v, -1.0, 1.0))),
    "SafeSinh": _wrap(lambda v: math.sinh(_clip(v, -100.0, 100.0))),
    "SafeCosh": _wrap(lambda v: math.cosh(_clip(v, -100.0, 100.0))),
    "SafeTanh": _wrap(math.tanh),
    "Add": _wrap(lambda a, b: a + b),
    "Sub": _wrap(lambda a, b: a - b),
    "Mul": _wrap(lambda a, b: a * b),
    "SafeDiv": _wrap(_div),
    "SafeMax": _wrap(max),
    "SafeMin": _wrap(min),
    "SafePow": _wrap(_pow),
}

_NAMED = {"pi": math.pi, "E": math.e, "sqrt2": math.sqrt(2), "sqrt3": math.sqrt(3)}
_TOKEN = re.compile(r"\s*(?:([A-Za-z_][A-Za-z0-9_]*)|(-?\d+(?:/\d+)?)|([(),]))")


def to_tree(text: str):
    """Parse a canonical string into nested tuples ``(head, child, ...)``.

    Leaves become ``("var", name)`` or ``("const", text)``.
    """
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ValueError(f"bad token at {pos} in {text!r}")
        pos = m.end()
        tokens.append(m.group(1) or m.group(2) or m.group(3))
    it = iter(tokens)

    def parse_one(tok):
        if tok[0].isdigit() or tok[0] == "-":
            return ("const", tok)
        if tok in SCALAR:
            assert next(it) == "("
            kids = [parse_one(next(it))]
            while True:
                sep = next(it)
                if sep == ")":
                    break
                assert sep == ","
                kids.append(parse_one(next(it)))
            return (tok, *kids)
        if tok in _NAMED:
            return ("const", tok)
        return ("var", tok)

    return parse_one(next(it))


def interpret(tree, env: dict) -> float:
    head = tree[0]
    if head == "var":
        return float(env[tree[1]])
    if head == "const":
        t = tree[1]
        if t in _NAMED:
            return _NAMED[t]
        if "/" in t:
            p, q = t.split("/")
            return int(p) / int(q)
        return float(int(t))
    args = [interpret(c, env) for c in tree[1:]]
    return SCALAR[head](*args)


# --- tree distance oracle -----------------------------------------------------


def brute_size(tree) -> int:
    if tree[0] in ("var", "const"):
        return 1
    return 1 + sum(brute_size(c) for c in tree[1:])


def brute_distance(a, b) -> int:
    if a == b:
        return 0
    la, lb = a[0] in ("var", "const"), b[0] in ("var", "const")
    if la and lb:
        return 1
    if la or lb:
        return max(brute_size(a), brute_size(b))
    if a[0] != b[0]:
        return 1 + max(brute_size(a), brute_size(b))
    total = 1
    for ca, cb in zip(a[1:], b[1:]):
        total += brute_distance(ca, cb)
    return total


def close(a: float, b: float, tol: float = 1e-9) -> bool:
    """Both non-finite in the same way, or equal within a mixed tolerance."""
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))
