"""Vectorized evaluation with totalized ("safe") operator semantics, plus the
metric tuple and the dynamic complexity penalty that together give fitness."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, fields
from functools import lru_cache
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .expr import Binary, BinaryOp, Const, Expr, Unary, UnaryOp, Var, complexity

EPSILON = 1e-10
DIV_GUARD = 1e-12
HYPERBOLIC_CLIP = 100.0


class CompileError(ValueError):
    """Raised when an expression cannot be turned into an evaluator."""


# --- safe elementwise operators -------------------------------------------------


def safe_log(x):
    return np.log(np.abs(x) + EPSILON)


def safe_sqrt(x):
    return np.sqrt(np.abs(x))


def safe_exp(x):
    a = np.abs(x)
    return np.exp(a / (a + 1.0))


def safe_asin(x):
    return np.arcsin(np.clip(x, -1.0, 1.0))


def safe_acos(x):
    return np.arccos(np.clip(x, -1.0, 1.0))


def safe_sinh(x):
    return np.sinh(np.clip(x, -HYPERBOLIC_CLIP, HYPERBOLIC_CLIP))


def safe_cosh(x):
    return np.cosh(np.clip(x, -HYPERBOLIC_CLIP, HYPERBOLIC_CLIP))


def safe_div(x, y):
    # unsigned guard: -1e-13 becomes +1e-12, so the sign of a tiny divisor is lost
    y = np.where(np.abs(y) < DIV_GUARD, DIV_GUARD, y)
    return np.divide(x, y)


def safe_pow(x, y):
    return np.power(np.abs(x), y)


SAFE_UNARY: dict[UnaryOp, Callable] = {
    UnaryOp.SIN: np.sin,
    UnaryOp.COS: np.cos,
    UnaryOp.EXP: safe_exp,
    UnaryOp.LOG: safe_log,
    UnaryOp.SQRT: safe_sqrt,
    UnaryOp.ATAN: np.arctan,
    UnaryOp.ACOS: safe_acos,
    UnaryOp.ASIN: safe_asin,
    UnaryOp.SINH: safe_sinh,
    UnaryOp.COSH: safe_cosh,
    UnaryOp.TANH: np.tanh,
}

SAFE_BINARY: dict[BinaryOp, Callable] = {
    BinaryOp.ADD: np.add,
    BinaryOp.SUB: np.subtract,
    BinaryOp.MUL: np.multiply,
    BinaryOp.DIV: safe_div,
    BinaryOp.MAX: np.maximum,
    BinaryOp.MIN: np.minimum,
    BinaryOp.POW: safe_pow,
}

# Unguarded counterparts used to compute ground-truth targets. SafeExp has no
# unguarded form; it is a bounded function in its own right.
EXACT_UNARY = dict(SAFE_UNARY)
EXACT_UNARY.update({
    UnaryOp.LOG: np.log,
    UnaryOp.SQRT: np.sqrt,
    UnaryOp.ACOS: np.arccos,
    UnaryOp.ASIN: np.arcsin,
    UnaryOp.SINH: np.sinh,
    UnaryOp.COSH: np.cosh,
})
EXACT_BINARY = dict(SAFE_BINARY)
EXACT_BINARY.update({BinaryOp.DIV: np.divide, BinaryOp.POW: np.power})


# --- compilation ----------------------------------------------------------------


def _emit(e: Expr, slots: Mapping[str, str]) -> str:
    if isinstance(e, Var):
        return slots[e.name]
    if isinstance(e, Const):
        return f"({e.numeric!r})"
    if isinstance(e, Unary):
        return f"u_{e.op.name}({_emit(e.child, slots)})"
    if isinstance(e, Binary):
        return f"b_{e.op.name}({_emit(e.left, slots)}, {_emit(e.right, slots)})"
    raise CompileError(f"unknown node {e!r}")


@lru_cache(maxsize=32768)
def _compile(e: Expr, schema: tuple[str, ...], exact: bool) -> Callable:
    missing = e.variables.difference(schema)
    if missing:
        raise CompileError(f"variables {sorted(missing)} not in schema {list(schema)}")
    slots = {name: f"v{i}" for i, name in enumerate(schema)}
    namespace = {}
    unary, binary = (EXACT_UNARY, EXACT_BINARY) if exact else (SAFE_UNARY, SAFE_BINARY)
    for op, fn in unary.items():
        namespace[f"u_{op.name}"] = fn
    for op, fn in binary.items():
        namespace[f"b_{op.name}"] = fn
    args = ", ".join(slots[name] for name in schema)
    source = f"lambda {args}: {_emit(e, slots)}"
    try:
        raw = eval(compile(source, f"<expr {e.key}>", "eval"), namespace)
    except (SyntaxError, RecursionError, MemoryError) as exc:
        raise CompileError(f"cannot compile {e.key}: {exc}") from None

    def evaluate(*columns):
        n = len(columns[0]) if columns else 1
        with np.errstate(all="ignore"):
            out = raw(*columns)
        out = np.asarray(out, dtype=float)
        if out.shape != (n,):
            out = np.broadcast_to(out, (n,)).copy()
        return out

    return evaluate


def compile_expr(e: Expr, schema: Sequence[str], exact: bool = False) -> Callable:
    """Vectorized evaluator taking one array per schema variable, in order.

    Constant results are broadcast to the input length. ``exact=True`` swaps
    the guarded operators for their plain numpy counterparts.
    """
    return _compile(e, tuple(schema), exact)


@lru_cache(maxsize=65536)
def _valid(e: Expr, schema: tuple[str, ...]) -> bool:
    try:
        fn = _compile(e, schema, False)
        value = fn(*([np.ones(1)] * len(schema)))
    except Exception:
        return False
    return bool(np.isfinite(value).all())


def is_valid(e: Expr, schema: Sequence[str]) -> bool:
    """True iff ``e`` compiles and is finite at the all-ones sample point."""
    return _valid(e, tuple(schema))


# --- data and metrics -----------------------------------------------------------


@dataclass
class Dataset:
    variables: dict[str, np.ndarray]
    target: np.ndarray

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=float).copy()
        self.target.setflags(write=False)
        n = self.target.shape[0] if self.target.ndim == 1 else -1
        if n < 2:
            raise ValueError("target must be a 1-D vector with at least 2 samples")
        if not np.isfinite(self.target).all():
            raise ValueError("target contains NaN or Inf")
        cols = {}
        for name, values in self.variables.items():
            Var(name)  # validates the identifier
            arr = np.asarray(values, dtype=float).copy()
            if arr.shape != (n,):
                raise ValueError(f"column {name!r} has shape {arr.shape}, expected ({n},)")
            if not np.isfinite(arr).all():
                raise ValueError(f"column {name!r} contains NaN or Inf")
            arr.setflags(write=False)
            cols[name] = arr
        if not cols:
            raise ValueError("dataset needs at least one variable")
        self.variables = cols

    @property
    def n(self) -> int:
        return self.target.shape[0]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.variables)

    @property
    def columns(self) -> list[np.ndarray]:
        return list(self.variables.values())


@dataclass(frozen=True)
class EvalMetrics:
    fitness: float
    mse: float
    complexity: float
    pearson: float
    spearman: float
    cosine_sim: float
    euclidean_sim: float
    r2: float
    relative_improvement: float

    @classmethod
    def failure(cls) -> "EvalMetrics":
        inf = float("inf")
        return cls(0.0, inf, inf, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0)

    @property
    def is_failure(self) -> bool:
        return math.isinf(self.mse)

    @property
    def accuracy(self) -> float:
        if self.is_failure:
            return 0.0
        return accuracy_score(self.r2, self.relative_improvement, self.cosine_sim,
                              self.euclidean_sim, self.pearson, self.spearman)

    def to_dict(self) -> dict:
        return {f.name: _json_float(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "EvalMetrics":
        return cls(**{f.name: float(data[f.name]) for f in fields(cls)})


def _json_float(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return int(v)
    v = float(v)
    if math.isfinite(v):
        return v
    return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")


def accuracy_score(r2, relative_improvement, cosine_sim, euclidean_sim, pearson, spearman) -> float:
    return (0.2 * r2 + 0.2 * relative_improvement + 0.2 * cosine_sim
            + 0.2 * euclidean_sim + 0.1 * abs(pearson) + 0.1 * abs(spearman))


@dataclass(frozen=True)
class PenaltyContext:
    generation: int
    total_generations: int
    best_fitness_overall: float
    population_diversity: float
    max_depth: int
    last_resort_active: bool = False

    def to_dict(self) -> dict:
        return {f.name: (_json_float(getattr(self, f.name)) if f.name == "best_fitness_overall"
                         else getattr(self, f.name)) for f in fields(self)}


def penalty(complexity: float, ctx: PenaltyContext) -> float:
    """Multiplicative complexity penalty in [0.1, 1]."""
    if ctx.last_resort_active:
        return 1.0
    progress = ctx.generation / ctx.total_generations
    base = 0.01 * (1.0 + math.tanh(2.0 * progress - 1.0))
    fitness_factor = min(max(1.5 - 1.5 * ctx.best_fitness_overall, 0.5), 1.5)
    complexity_scale = math.log1p(complexity) / math.log1p(ctx.max_depth)
    diversity_factor = 1.0 + math.tanh(5.0 * (ctx.population_diversity - 0.5))
    value = math.exp(-base * fitness_factor * complexity_scale * diversity_factor)
    return min(max(value, 0.1), 1.0)


@dataclass(frozen=True)
class _Scores:
    """Context-free part of the metric tuple."""
    mse: float
    complexity: int
    pearson: float
    spearman: float
    cosine_sim: float
    euclidean_sim: float
    r2: float
    relative_improvement: float

    @property
    def accuracy(self) -> float:
        return accuracy_score(self.r2, self.relative_improvement, self.cosine_sim,
                              self.euclidean_sim, self.pearson, self.spearman)


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    denom = math.sqrt(float(np.dot(da, da)) * float(np.dot(db, db)))
    if denom == 0.0 or not math.isfinite(denom):
        return math.nan
    return min(max(float(np.dot(da, db)) / denom, -1.0), 1.0)


class Evaluator:
    """Scores expressions against one dataset.

    Context-free scores are cached per canonical string, so re-scoring the
    same expression under a new penalty context costs one multiplication.
    """

    def __init__(self, dataset: Dataset, eval_timeout: float = 5.0):
        self.dataset = dataset
        self.schema = dataset.names
        self.eval_timeout = eval_timeout
        self._columns = dataset.columns
        t = dataset.target
        self._target = t
        self._t_mean = float(t.mean())
        self._t_std = float(t.std())
        self._t_ranks = rankdata(t)
        self._z_t = (t - self._t_mean) / self._t_std if self._t_std > 0 else None
        self.baseline_mse = float(np.mean((t - self._t_mean) ** 2))
        self._cache: dict[str, Optional[_Scores]] = {}

    def predict(self, e: Expr) -> np.ndarray:
        return compile_expr(e, self.schema)(*self._columns)

    def scores(self, e: Expr) -> Optional[_Scores]:
        hit = self._cache.get(e.key, False)
        if hit is not False:
            return hit
        result = self._score(e)
        self._cache[e.key] = result
        return result

    def _score(self, e: Expr) -> Optional[_Scores]:
        if self.baseline_mse == 0.0 or self._z_t is None:
            return None
        try:
            fn = compile_expr(e, self.schema)
        except CompileError:
            return None
        start = time.perf_counter()
        p = fn(*self._columns)
        if time.perf_counter() - start > self.eval_timeout:
            return None
        if not np.isfinite(p).all():
            return None
        t = self._target
        with np.errstate(all="ignore"):
            resid = t - p
            sse = float(np.dot(resid, resid))
            mse = sse / t.shape[0]
            r2 = 1.0 - mse / self.baseline_mse
            pearson = _pearson(t, p)
            p_ranks = rankdata(p)
            if np.array_equal(p_ranks, self._t_ranks):
                spearman = 1.0
            else:
                spearman = _pearson(self._t_ranks, p_ranks)
            z_p = (p - self._t_mean) / self._t_std
            z_t = self._z_t
            norm_p = float(np.linalg.norm(z_p))
            cosine = float(np.dot(z_t, z_p)) / (float(np.linalg.norm(z_t)) * norm_p) if norm_p > 0 else math.nan
            cosine = min(cosine, 1.0)
            euclid = 1.0 - float(np.linalg.norm(z_t - z_p)) / math.sqrt(t.shape[0])
        rel = max(0.0, (self.baseline_mse - mse) / self.baseline_mse)
        values = (mse, r2, pearson, spearman, cosine, euclid, rel)
        if not all(math.isfinite(v) for v in values):
            return None
        return _Scores(mse, complexity(e), pearson, spearman, cosine, euclid, r2, rel)

    def metrics(self, e: Expr, ctx: Optional[PenaltyContext] = None) -> EvalMetrics:
        """Full metric tuple. Without a context the penalty is 1."""
        s = self.scores(e)
        if s is None:
            return EvalMetrics.failure()
        factor = 1.0 if ctx is None else penalty(s.complexity, ctx)
        return EvalMetrics(
            fitness=s.accuracy * factor,
            mse=s.mse,
            complexity=s.complexity,
            pearson=s.pearson,
            spearman=s.spearman,
            cosine_sim=s.cosine_sim,
            euclidean_sim=s.euclidean_sim,
            r2=s.r2,
            relative_improvement=s.relative_improvement,
        )


def metrics(e: Expr, d: Dataset, ctx: Optional[PenaltyContext] = None,
            eval_timeout: float = 5.0) -> EvalMetrics:
    return Evaluator(d, eval_timeout).metrics(e, ctx)
