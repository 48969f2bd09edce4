"""Immutable expression trees over a closed operator and constant vocabulary.

Every node carries its depth, size, free variables and canonical string,
computed once at construction. Equality and hashing go through the
canonical string, which is injective on distinct trees.

Canonical grammar::

    x                      variable
    3, -3, 1/2, -7/4       exact rationals
    pi, E, sqrt2, sqrt3    named irrationals
    Sin(x)                 unary application
    SafeDiv(x, Add(y, 2))  binary application
"""

from __future__ import annotations

import ast
import enum
import math
import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Union


class UnaryOp(enum.Enum):
    SIN = "Sin"
    COS = "Cos"
    EXP = "SafeExp"
    LOG = "SafeLog"
    SQRT = "SafeSqrt"
    ATAN = "SafeAtan"
    ACOS = "SafeAcos"
    ASIN = "SafeAsin"
    SINH = "SafeSinh"
    COSH = "SafeCosh"
    TANH = "SafeTanh"


class BinaryOp(enum.Enum):
    ADD = "Add"
    SUB = "Sub"
    MUL = "Mul"
    DIV = "SafeDiv"
    MAX = "SafeMax"
    MIN = "SafeMin"
    POW = "SafePow"


class NamedConstant(enum.Enum):
    PI = "pi"
    E = "E"
    SQRT2 = "sqrt2"
    SQRT3 = "sqrt3"

    @property
    def numeric(self) -> float:
        return _NAMED_VALUES[self]


_NAMED_VALUES = {
    NamedConstant.PI: math.pi,
    NamedConstant.E: math.e,
    NamedConstant.SQRT2: math.sqrt(2.0),
    NamedConstant.SQRT3: math.sqrt(3.0),
}

UNARY_OPS = tuple(UnaryOp)
BINARY_OPS = tuple(BinaryOp)
COMMUTATIVE = frozenset({BinaryOp.ADD, BinaryOp.MUL})

_IDENTIFIER = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_RESERVED = frozenset(
    [c.value for c in NamedConstant]
    + [op.value for op in UnaryOp]
    + [op.value for op in BinaryOp]
)


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ("depth", "size", "key", "variables", "_hash")

    def _finish(self, depth: int, size: int, key: str, variables: frozenset) -> None:
        self.depth = depth
        self.size = size
        self.key = key
        self.variables = variables
        self._hash = hash(key)

    @property
    def children(self) -> tuple["Expr", ...]:
        return ()

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        return isinstance(other, Expr) and self._hash == other._hash and self.key == other.key

    def __ne__(self, other: object) -> bool:
        return not self.__eq__(other)

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        return self.key

    def __repr__(self) -> str:
        return f"{type(self).__name__}<{self.key}>"

    def __setattr__(self, name, value):
        if hasattr(self, "_hash"):
            raise AttributeError("Expr nodes are immutable")
        object.__setattr__(self, name, value)

    # Arithmetic sugar, mostly for building fixtures and problem sets.
    def __add__(self, other):
        return Binary(BinaryOp.ADD, self, as_expr(other))

    def __radd__(self, other):
        return Binary(BinaryOp.ADD, as_expr(other), self)

    def __sub__(self, other):
        return Binary(BinaryOp.SUB, self, as_expr(other))

    def __rsub__(self, other):
        return Binary(BinaryOp.SUB, as_expr(other), self)

    def __mul__(self, other):
        return Binary(BinaryOp.MUL, self, as_expr(other))

    def __rmul__(self, other):
        return Binary(BinaryOp.MUL, as_expr(other), self)

    def __truediv__(self, other):
        return Binary(BinaryOp.DIV, self, as_expr(other))

    def __rtruediv__(self, other):
        return Binary(BinaryOp.DIV, as_expr(other), self)

    def __pow__(self, other):
        return Binary(BinaryOp.POW, self, as_expr(other))

    def __rpow__(self, other):
        return Binary(BinaryOp.POW, as_expr(other), self)

    def __neg__(self):
        return Binary(BinaryOp.MUL, Const(-1), self)


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        if not isinstance(name, str) or not _IDENTIFIER.match(name):
            raise ValueError(f"invalid variable name: {name!r}")
        if name in _RESERVED:
            raise ValueError(f"variable name {name!r} is reserved")
        object.__setattr__(self, "name", name)
        self._finish(1, 1, name, frozenset((name,)))


class Const(Expr):
    """Exact constant: a rational number or one of the named irrationals."""

    __slots__ = ("value",)

    def __init__(self, value: Union[int, str, Fraction, NamedConstant]):
        if isinstance(value, NamedConstant):
            key = value.value
        else:
            if isinstance(value, bool):
                raise TypeError("bool is not a constant")
            if isinstance(value, float):
                if not math.isfinite(value):
                    raise ValueError("constants must be finite")
                value = Fraction(repr(value))
            value = Fraction(value)
            key = str(value)
        object.__setattr__(self, "value", value)
        self._finish(1, 1, key, frozenset())

    @property
    def is_rational(self) -> bool:
        return isinstance(self.value, Fraction)

    @property
    def numeric(self) -> float:
        if isinstance(self.value, NamedConstant):
            return self.value.numeric
        return float(self.value)


class Unary(Expr):
    __slots__ = ("op", "child")

    def __init__(self, op: UnaryOp, child: Expr):
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "child", child)
        self._finish(
            child.depth + 1,
            child.size + 1,
            f"{op.value}({child.key})",
            child.variables,
        )

    @property
    def children(self) -> tuple[Expr, ...]:
        return (self.child,)


class Binary(Expr):
    __slots__ = ("op", "left", "right")

    def __init__(self, op: BinaryOp, left: Expr, right: Expr):
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        self._finish(
            max(left.depth, right.depth) + 1,
            left.size + right.size + 1,
            f"{op.value}({left.key}, {right.key})",
            left.variables | right.variables,
        )

    @property
    def children(self) -> tuple[Expr, ...]:
        return (self.left, self.right)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, NamedConstant):
        return Const(value)
    if isinstance(value, (int, float, Fraction)):
        return Const(value)
    if isinstance(value, str):
        return parse(value)
    raise TypeError(f"cannot convert {type(value).__name__} to Expr")


def rebuild(node: Expr, children: tuple[Expr, ...]) -> Expr:
    """Same head as ``node`` with new children."""
    if isinstance(node, Unary):
        return Unary(node.op, children[0])
    if isinstance(node, Binary):
        return Binary(node.op, children[0], children[1])
    return node


def head(node: Expr):
    """Operator of an interior node, or the node kind for leaves."""
    if isinstance(node, (Unary, Binary)):
        return node.op
    return type(node)


CONSTANT_POOL: tuple[Const, ...] = tuple(Const(i) for i in range(-10, 11)) + (
    Const(NamedConstant.PI),
    Const(NamedConstant.E),
    Const(Fraction(1, 2)),
    Const(Fraction(1, 3)),
    Const(Fraction(1, 4)),
    Const(Fraction(1, 5)),
    Const(NamedConstant.SQRT2),
    Const(NamedConstant.SQRT3),
)


# --- structural queries -------------------------------------------------------


def depth(e: Expr) -> int:
    return e.depth


def size(e: Expr) -> int:
    return e.size


def free_variables(e: Expr) -> frozenset:
    return e.variables


def complexity(e: Expr) -> int:
    """Number of operator applications; leaves count zero."""
    return e.size - sum(1 for _ in _leaves(e))


def _leaves(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        node = stack.pop()
        kids = node.children
        if kids:
            stack.extend(kids)
        else:
            yield node


@lru_cache(maxsize=65536)
def subexpressions(e: Expr) -> tuple[Expr, ...]:
    """Pre-order walk including ``e`` itself and every leaf."""
    out = [e]
    for child in e.children:
        out.extend(subexpressions(child))
    return tuple(out)


def operators(e: Expr) -> set:
    return {head(node) for node in subexpressions(e) if not node.is_leaf}


def substitute(e: Expr, target: Expr, replacement: Expr) -> Expr:
    if e == target:
        return replacement
    kids = e.children
    if not kids or target.size > e.size:
        return e
    new_kids = tuple(substitute(k, target, replacement) for k in kids)
    if all(a is b for a, b in zip(kids, new_kids)):
        return e
    return rebuild(e, new_kids)


def truncate(e: Expr, max_depth: int) -> Expr:
    """Cut ``e`` down to at most ``max_depth`` levels.

    Children are truncated to ``max_depth - 1`` so the rebuilt parent fits.
    At ``max_depth == 1`` an interior node cannot be kept; the deepest child
    that already fits is returned, otherwise the first child is truncated
    further.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if e.depth <= max_depth:
        return e
    kids = e.children
    if max_depth == 1:
        fitting = [k for k in kids if k.depth <= 1]
        if fitting:
            return fitting[0]
        return truncate(kids[0], 1)
    return rebuild(e, tuple(truncate(k, max_depth - 1) for k in kids))


# --- canonicalisation ---------------------------------------------------------

_DIV_GUARD = Fraction(1, 10**12)


def _fold(op: BinaryOp, a: Fraction, b: Fraction):
    if op is BinaryOp.ADD:
        return a + b
    if op is BinaryOp.SUB:
        return a - b
    if op is BinaryOp.MUL:
        return a * b
    if op is BinaryOp.DIV and abs(b) >= _DIV_GUARD:
        return a / b
    return None


def _is_value(e: Expr, v: int) -> bool:
    return isinstance(e, Const) and e.is_rational and e.value == v


def _sorted_pair(op: BinaryOp, left: Expr, right: Expr) -> Expr:
    if op in COMMUTATIVE and right.key < left.key:
        left, right = right, left
    return Binary(op, left, right)


def simplify(e: Expr) -> Expr:
    """Apply the fixed rewrite table bottom-up.

    Rules: rational constant folding for Add/Sub/Mul/SafeDiv, ``x+0 -> x``,
    ``x-0 -> x``, ``x*1 -> x``, ``x*0 -> 0``, double negation via ``0-(0-x)``
    or ``-1*(-1*x)``, and canonical ordering of Add/Mul operands.
    """
    return _simplify(e)


@lru_cache(maxsize=65536)
def _simplify(e: Expr) -> Expr:
    if isinstance(e, Unary):
        child = _simplify(e.child)
        return e if child is e.child else Unary(e.op, child)
    if not isinstance(e, Binary):
        return e
    op = e.op
    left, right = _simplify(e.left), _simplify(e.right)
    if isinstance(left, Const) and isinstance(right, Const) and left.is_rational and right.is_rational:
        folded = _fold(op, left.value, right.value)
        if folded is not None:
            return Const(folded)
    if op is BinaryOp.ADD:
        if _is_value(right, 0):
            return left
        if _is_value(left, 0):
            return right
    elif op is BinaryOp.SUB:
        if _is_value(right, 0):
            return left
        if _is_value(left, 0) and isinstance(right, Binary) and right.op is BinaryOp.SUB and _is_value(right.left, 0):
            return right.right
    elif op is BinaryOp.MUL:
        if _is_value(left, 0) or _is_value(right, 0):
            return Const(0)
        if _is_value(right, 1):
            return left
        if _is_value(left, 1):
            return right
        for neg, other in ((left, right), (right, left)):
            if _is_value(neg, -1) and isinstance(other, Binary) and other.op is BinaryOp.MUL:
                if _is_value(other.left, -1):
                    return other.right
                if _is_value(other.right, -1):
                    return other.left
    return _sorted_pair(op, left, right)


@lru_cache(maxsize=65536)
def sort_commutative(e: Expr) -> Expr:
    """Reorder Add/Mul operands by canonical string; nothing else changes."""
    if isinstance(e, Unary):
        child = sort_commutative(e.child)
        return e if child is e.child else Unary(e.op, child)
    if isinstance(e, Binary):
        return _sorted_pair(e.op, sort_commutative(e.left), sort_commutative(e.right))
    return e


def canonical_key(e: Expr) -> str:
    """Deduplication key: x+y and y+x collapse, x+0 and x do not."""
    return sort_commutative(e).key


# --- parsing ------------------------------------------------------------------


class ParseError(ValueError):
    pass


_UNARY_NAMES = {op.value: op for op in UnaryOp}
_UNARY_NAMES.update(
    sin=UnaryOp.SIN, cos=UnaryOp.COS, exp=UnaryOp.EXP, log=UnaryOp.LOG,
    sqrt=UnaryOp.SQRT, atan=UnaryOp.ATAN, acos=UnaryOp.ACOS, asin=UnaryOp.ASIN,
    sinh=UnaryOp.SINH, cosh=UnaryOp.COSH, tanh=UnaryOp.TANH,
)
_BINARY_NAMES = {op.value: op for op in BinaryOp}
_BINARY_NAMES.update(
    add=BinaryOp.ADD, sub=BinaryOp.SUB, mul=BinaryOp.MUL, div=BinaryOp.DIV,
    max=BinaryOp.MAX, min=BinaryOp.MIN, pow=BinaryOp.POW,
)
_NAMED = {c.value: c for c in NamedConstant}
_INFIX = {
    ast.Add: BinaryOp.ADD,
    ast.Sub: BinaryOp.SUB,
    ast.Mult: BinaryOp.MUL,
    ast.Div: BinaryOp.DIV,
    ast.Pow: BinaryOp.POW,
}


def parse(text: str) -> Expr:
    """Parse the canonical grammar, plus infix ``+ - * / ** ^`` and lowercase
    aliases (``sin``, ``log`` ...). Aliases map onto the safe operators, so
    ``exp`` means the bounded SafeExp and ``x**3`` means ``|x|**3``.
    """
    try:
        # Python binds ^ looser than +, so treat it as ** before parsing
        tree = ast.parse(text.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"cannot parse {text!r}: {exc.msg}") from None
    return _convert(tree.body)


def _literal(node) -> Fraction | None:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        if isinstance(node.value, float):
            if not math.isfinite(node.value):
                raise ParseError("non-finite constant")
            return Fraction(repr(node.value))
        return Fraction(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _literal(node.operand)
        if inner is not None:
            return -inner if isinstance(node.op, ast.USub) else inner
    return None


def _convert(node) -> Expr:
    lit = _literal(node)
    if lit is not None:
        return Const(lit)
    if isinstance(node, ast.Name):
        if node.id in _NAMED:
            return Const(_NAMED[node.id])
        try:
            return Var(node.id)
        except ValueError as exc:
            raise ParseError(str(exc)) from None
    if isinstance(node, ast.UnaryOp):
        if isinstance(node.op, ast.USub):
            return Binary(BinaryOp.MUL, Const(-1), _convert(node.operand))
        if isinstance(node.op, ast.UAdd):
            return _convert(node.operand)
    if isinstance(node, ast.BinOp) and type(node.op) in _INFIX:
        if isinstance(node.op, ast.Div):
            num, den = _literal(node.left), _literal(node.right)
            if num is not None and den is not None and den != 0 and num.denominator == 1 and den.denominator == 1:
                return Const(num / den)
        return Binary(_INFIX[type(node.op)], _convert(node.left), _convert(node.right))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        name, args = node.func.id, node.args
        if name in _UNARY_NAMES and len(args) == 1:
            return Unary(_UNARY_NAMES[name], _convert(args[0]))
        if name in _BINARY_NAMES and len(args) == 2:
            return Binary(_BINARY_NAMES[name], _convert(args[0]), _convert(args[1]))
        raise ParseError(f"unknown function {name!r} with {len(args)} argument(s)")
    raise ParseError(f"unsupported syntax: {ast.dump(node)}")


def render(e: Expr) -> str:
    return e.key
