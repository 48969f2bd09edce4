"""Benchmark problem sets, seeded dataset sampling, structural match scores
and suite-level reports.

Ground truths are built from the safe vocabulary so that, on each problem's
input domain, safe and exact semantics coincide: odd powers over signed
domains are written ``x * x**(n-1)``, ``exp(z)`` is ``E**z`` and ``tan`` is
``sin/cos``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
import zlib
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .evolution import EvolutionConfig, RunStatus, evolve
from .expr import (
    Binary,
    BinaryOp,
    Const,
    Expr,
    NamedConstant,
    Unary,
    UnaryOp,
    Var,
    free_variables,
    operators,
    simplify,
)
from .numeric import Dataset, Evaluator, _json_float, compile_expr

SET_NAMES = ("keijzer", "korns", "livermore", "nguyen", "r_rationals")
DEFAULT_SAMPLES = 100
CSV_FIELDS = ("index", "ground_truth", "best_expression", "r2", "variable_match", "operation_match",
              "composite_metric", "generations_used", "status")
R2_BUCKETS = ("R² < 0",) + tuple(f"{i / 10:.1f}-{(i + 1) / 10:.1f}" for i in range(10))


class UnsatisfiableDomain(RuntimeError):
    """Too many samples produced a non-finite target."""


class UnknownSet(KeyError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    set_name: str
    index: int
    ground_truth: Expr
    variable_ranges: dict
    default_samples: int = DEFAULT_SAMPLES

    def __post_init__(self):
        missing = self.ground_truth.variables - set(self.variable_ranges)
        if missing:
            raise ValueError(f"{self.name}: no range for {sorted(missing)}")
        for var, (lo, hi) in self.variable_ranges.items():
            if not lo < hi:
                raise ValueError(f"{self.name}: empty range for {var}")

    @property
    def name(self) -> str:
        return f"{self.set_name}#{self.index}"

    def to_dict(self) -> dict:
        return {
            "set": self.set_name,
            "index": self.index,
            "expression": self.ground_truth.key,
            "ranges": {k: [float(lo), float(hi)] for k, (lo, hi) in self.variable_ranges.items()},
        }


# --- ground-truth building blocks ---------------------------------------------

x, y, z = Var("x"), Var("y"), Var("z")
X0, X1, X2, X3, X4 = (Var(f"X{i}") for i in range(5))
E = Const(NamedConstant.E)


def _c(v) -> Const:
    return Const(v)


def sin(a):
    return Unary(UnaryOp.SIN, a)


def cos(a):
    return Unary(UnaryOp.COS, a)


def log(a):
    return Unary(UnaryOp.LOG, a)


def sqrt(a):
    return Unary(UnaryOp.SQRT, a)


def sinh(a):
    return Unary(UnaryOp.SINH, a)


def cosh(a):
    return Unary(UnaryOp.COSH, a)


def tanh(a):
    return Unary(UnaryOp.TANH, a)


def tan(a):
    return Binary(BinaryOp.DIV, sin(a), cos(a))


def exp(a):
    return Binary(BinaryOp.POW, E, a)


def ipow(b, n: int):
    """Integer power exact on signed inputs."""
    if n == 1:
        return b
    if n % 2 == 0:
        return b ** n
    return b * b ** (n - 1)


def neg(a):
    return _c(-1) * a


def _ranges(names, lo, hi):
    return {n: (lo, hi) for n in names}


def _keijzer() -> list[ProblemSpec]:
    r = dict
    rows = [
        (_c(0.3) * x * sin(_c(2) * _c(3.14) * x), r(x=(0, 10))),
        (x ** 3 * exp(neg(x)) * cos(x) * sin(x) * (sin(x) ** 2 * cos(x) - 1), r(x=(0, 10))),
        (_c(30) * x * z / ((x - 10) * y ** 2), r(x=(1, 100), y=(1, 10), z=(0, 10))),
        (log(x), r(x=(0, 100))),
        (sqrt(x), r(x=(0, 10))),
        (x ** y, r(x=(0, 10), y=(0, 10))),
        (x * y + sin((x - 1) * (y - 1)), r(x=(1, 10), y=(1, 5))),
        (x ** 4 - x ** 3 + y ** 2 / 2 - y, r(x=(0, 10), y=(0, 10))),
        (_c(6) * sin(x) * cos(y), r(x=(0, 10), y=(0, 10))),
        (_c(8) / (_c(2) + x ** 2 + y ** 2), r(x=(0, 10), y=(0, 10))),
        (x ** 3 / 5 + y ** 3 / 2 - y - x, r(x=(0, 10), y=(0, 10))),
    ]
    return [ProblemSpec("keijzer", i + 1, gt, rg) for i, (gt, rg) in enumerate(rows)]


def _korns() -> list[ProblemSpec]:
    pi = math.pi
    k2 = _c(0.23) + _c(14.2) * (X3 + X1) / (_c(3.0) * X4)
    rows = [
        (_c(1.57) + _c(24.3) * X3, {"X3": (0, 10)}),
        (k2, {"X1": (0, 10), "X3": (0, 10), "X4": (1, 10)}),
        (k2, _ranges(["X0", "X1", "X2", "X3", "X4"], 1, 10)),
        (_c(3.0) + _c(2.13) * log(X4), {"X4": (1, 10)}),
        (_c(1.3) + _c(0.13) * sqrt(X0), {"X0": (0, 10)}),
        (_c(213.80940889) - _c(213.80940889) * exp(_c(-0.54723748542) * X0), {"X0": (0, 10)}),
        (_c(6.87) + _c(11) * sqrt(_c(7.23) * X0 * X3 * X4), _ranges(["X0", "X3", "X4"], 0, 10)),
        ((sqrt(X0) / log(X1)) * (exp(X2) / X3 ** 2),
         {"X0": (1, 10), "X1": (1, 10), "X2": (0, 10), "X3": (1, 10)}),
        (_c(0.81) + _c(24.3) * (_c(2.0) * X1 + _c(3.0) * X2 ** 2) / (_c(4.0) * X3 ** 3 + _c(5.0) * X4 ** 4),
         {"X1": (0, 10), "X2": (0, 10), "X3": (1, 10), "X4": (1, 10)}),
        (_c(6.87) + _c(11) * cos(_c(7.23) * X0 ** 3), {"X0": (0, 10)}),
        (_c(2.0) - _c(2.1) * (cos(_c(9.8) * X0) * sin(_c(1.3) * X4)), _ranges(["X0", "X4"], 0, 10)),
        (_c(32.0) - _c(3.0) * ((tan(X0) / tan(X1)) * (tan(X2) / tan(X3))),
         _ranges(["X0", "X1", "X2", "X3"], 0, pi)),
        (_c(22.0) + _c(4.2) * ((cos(X0) - tan(X1)) * (tanh(X2) / sin(X3))),
         {"X0": (0, pi), "X1": (0, pi), "X2": (-5, 5), "X3": (0.1, pi)}),
        (_c(12.0) - _c(6.0) * ((tan(X0) / exp(X1)) * (log(X2) - tan(X3))),
         {"X0": (0, pi), "X1": (0, 10), "X2": (1, 10), "X3": (0, pi)}),
    ]
    return [ProblemSpec("korns", i + 1, gt, rg) for i, (gt, rg) in enumerate(rows)]


def _poly(v, degrees, signed=True):
    terms = [ipow(v, d) if signed else v ** d if d > 1 else v for d in degrees]
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return out


def _livermore() -> list[ProblemSpec]:
    third, fifth = Fraction(1, 3), Fraction(1, 5)
    rows = [
        (_c(third) + x + sin(x ** 2), (-10, 10)),
        (sin(x ** 2) * cos(x) - 2, (-1, 1)),
        (sin(ipow(x, 3)) * cos(x ** 2) - 1, (-1, 1)),
        (log(x + 1) + log(x ** 2 + 1) + log(x), (0, 2)),
        (x ** 4 - x ** 3 + x ** 2 - y, (0, 1)),
        (_c(4) * x ** 4 + _c(3) * ipow(x, 3) + _c(2) * x ** 2 + x, (-1, 1)),
        (sinh(x), (-1, 1)),
        (cosh(x), (-1, 1)),
        (_poly(x, range(9, 0, -1)), (-1, 1)),
        (_c(6) * sin(x) * cos(y), (0, 1)),
        (x ** 2 * x ** 2 / (x + y), (-1, 1)),
        (ipow(x, 5) / ipow(y, 3), (-1, 1)),
        (y ** third, (0, 4)),
        (ipow(x, 3) + x ** 2 + x + sin(x) + sin(x ** 2), (-1, 1)),
        (x ** fifth, (0, 4)),
        (x ** Fraction(2, 5), (0, 4)),
        (_c(4) * sin(x) * cos(y), (0, 1)),
        (sin(x ** 2) * cos(x) - 5, (-1, 1)),
        (ipow(x, 5) + x ** 4 + x ** 2 + x, (-1, 1)),
        (exp(neg(x ** 2)), (-1, 1)),
        (_poly(x, range(8, 0, -1)), (-1, 1)),
        (exp(_c(-0.5) * x ** 2), (-1, 1)),
    ]
    out = []
    for i, (gt, (lo, hi)) in enumerate(rows):
        names = sorted(gt.variables)
        out.append(ProblemSpec("livermore", i + 1, gt, _ranges(names, lo, hi)))
    return out


def _nguyen() -> list[ProblemSpec]:
    rows = [
        _poly(x, (3, 2, 1), signed=False),
        _poly(x, (4, 3, 2, 1), signed=False),
        _poly(x, (5, 4, 3, 2, 1), signed=False),
        _poly(x, (6, 5, 4, 3, 2, 1), signed=False),
        sin(x ** 2) * cos(x) - 1,
        sin(x) + sin(x + x ** 2),
        log(x + 1) + log(x ** 2 + 1),
        sqrt(x),
        sin(x) + sin(y ** 2),
        _c(2) * sin(x) * cos(y),
        x ** y,
        _c(1) / (_c(1) + x ** -4) + _c(1) / (_c(1) + y ** -4),
    ]
    ranges = {8: (0, 100), 12: (1, 10)}
    out = []
    for i, gt in enumerate(rows, start=1):
        lo, hi = ranges.get(i, (0, 10))
        out.append(ProblemSpec("nguyen", i, gt, _ranges(sorted(gt.variables), lo, hi)))
    return out


def _r_rationals() -> list[ProblemSpec]:
    funcs = [
        ipow(x + 1, 3) / (x ** 2 - x + 1),
        (ipow(x, 5) - _c(3) * ipow(x, 3) + 1) / (x ** 2 + 1),
        (x ** 6 + ipow(x, 5)) / (x ** 4 + ipow(x, 3) + x ** 2 + x + 1),
    ]
    out = []
    for j, (lo, hi) in enumerate([(-1, 1), (-10, 10)]):
        for i, gt in enumerate(funcs):
            out.append(ProblemSpec("r_rationals", j * 3 + i + 1, gt, {"x": (lo, hi)}))
    return out


_BUILDERS = {
    "keijzer": _keijzer,
    "korns": _korns,
    "livermore": _livermore,
    "nguyen": _nguyen,
    "r_rationals": _r_rationals,
}
_REGISTRY: Optional[dict] = None


def registry(set_name: Optional[str] = None) -> list[ProblemSpec]:
    global _REGISTRY
    if _REGISTRY is None:
        _REGISTRY = {name: build() for name, build in _BUILDERS.items()}
    if set_name is None:
        return [p for name in SET_NAMES for p in _REGISTRY[name]]
    if set_name not in _REGISTRY:
        raise UnknownSet(f"unknown problem set {set_name!r}; expected one of {SET_NAMES}")
    return list(_REGISTRY[set_name])


def get_problem(set_name: str, index: int) -> ProblemSpec:
    for p in registry(set_name):
        if p.index == index:
            return p
    raise KeyError(f"{set_name} has no problem {index}")


def registry_export(set_name: Optional[str] = None) -> list[dict]:
    return [p.to_dict() for p in registry(set_name)]


# --- sampling -------------------------------------------------------------------


def sample_problem(p: ProblemSpec, n: Optional[int] = None, seed: int = 0) -> Dataset:
    """Uniform draws strictly inside each range; rows whose exact target is
    not finite are redrawn."""
    n = p.default_samples if n is None else n
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng([seed, zlib.crc32(p.set_name.encode()), p.index])
    names = list(p.variable_ranges)
    truth = compile_expr(p.ground_truth, names, exact=True)

    def draw(k):
        cols = []
        for name in names:
            lo, hi = p.variable_ranges[name]
            nudge = 1e-9 * (hi - lo)
            cols.append(rng.uniform(lo + nudge, hi - nudge, k))
        return cols

    cols = draw(n)
    target = truth(*cols)
    redraws = 0
    bad = ~np.isfinite(target)
    while bad.any():
        k = int(bad.sum())
        redraws += k
        if redraws > 100 * n:
            raise UnsatisfiableDomain(f"{p.name}: target not finite after {redraws} redraws")
        fresh = draw(k)
        for col, new in zip(cols, fresh):
            col[bad] = new
        target = truth(*cols)
        bad = ~np.isfinite(target)
    return Dataset(dict(zip(names, cols)), target)


# --- structural match -----------------------------------------------------------

_OP_BASE = {
    BinaryOp.ADD: "add",
    BinaryOp.SUB: "sub",
    BinaryOp.MUL: "mul",
    BinaryOp.DIV: "div",
    BinaryOp.MAX: "max",
    BinaryOp.MIN: "min",
    BinaryOp.POW: "pow",
    UnaryOp.SIN: "sin",
    UnaryOp.COS: "cos",
    UnaryOp.EXP: "exp",
    UnaryOp.LOG: "log",
    UnaryOp.SQRT: "sqrt",
    UnaryOp.ATAN: "atan",
    UnaryOp.ACOS: "acos",
    UnaryOp.ASIN: "asin",
    UnaryOp.SINH: "sinh",
    UnaryOp.COSH: "cosh",
    UnaryOp.TANH: "tanh",
}


def operation_names(e: Expr) -> frozenset:
    return frozenset(_OP_BASE[op] for op in operators(simplify(e)))


def variable_set_match(truth: Expr, found: Expr) -> int:
    return int(free_variables(simplify(truth)) == free_variables(simplify(found)))


def operation_set_match(truth: Expr, found: Expr) -> int:
    return int(operation_names(truth) == operation_names(found))


@dataclass(frozen=True)
class MatchFlags:
    variable_match: int
    operation_match: int


def composite_metric(r2: float, flags_or_vm, op_match: Optional[int] = None) -> float:
    """0.5 R² + 0.25 variable match + 0.25 operation match.

    Accepts either a MatchFlags or the two flags as separate arguments.
    """
    if isinstance(flags_or_vm, MatchFlags):
        vm, om = flags_or_vm.variable_match, flags_or_vm.operation_match
    else:
        vm, om = flags_or_vm, op_match
    return 0.5 * r2 + 0.25 * vm + 0.25 * om


# --- suites -----------------------------------------------------------------------


@dataclass
class BenchmarkResult:
    problem: ProblemSpec
    best_expression: Expr
    r2: float
    composite_metric: float
    flags: MatchFlags
    generations_used: int
    wall_time: float
    status: str

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "index": self.problem.index,
            "ground_truth": self.problem.ground_truth.key,
            "best_expression": self.best_expression.key,
            "r2": _json_float(self.r2),
            "variable_match": self.flags.variable_match,
            "operation_match": self.flags.operation_match,
            "composite_metric": _json_float(self.composite_metric),
            "generations_used": self.generations_used,
            "status": self.status,
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out


def r2_bucket(r2: float) -> str:
    if not math.isfinite(r2) or r2 < 0:
        return R2_BUCKETS[0]
    return R2_BUCKETS[1 + min(int(math.floor(r2 * 10 + 1e-12)), 9)]


def aggregate(results: list[BenchmarkResult]) -> dict:
    n = len(results)
    counts = {label: 0 for label in R2_BUCKETS}
    for r in results:
        counts[r2_bucket(r.r2)] += 1
    pct = lambda k: 100.0 * k / n if n else 0.0
    return {
        "buckets": {label: pct(c) for label, c in counts.items()},
        "exact_vm_pct": pct(sum(r.flags.variable_match for r in results)),
        "exact_op_pct": pct(sum(r.flags.operation_match for r in results)),
        "problems": n,
    }


@dataclass
class SuiteReport:
    set_name: str
    config: EvolutionConfig
    n_samples: int
    seed: int
    results: list

    @property
    def aggregate(self) -> dict:
        return aggregate(self.results)

    def to_dict(self, include_timing: bool = False) -> dict:
        config = self.config.to_dict()
        config.update(n_samples=self.n_samples, data_seed=self.seed)
        return {
            "set": self.set_name,
            "config": config,
            "per_problem": [r.to_dict(include_timing) for r in self.results],
            "aggregate": self.aggregate,
        }

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, ensure_ascii=False)

    def to_csv(self, include_timing: bool = False) -> str:
        buf = io.StringIO()
        rows = [r.to_dict(include_timing) for r in self.results]
        fields = list(rows[0]) if rows else list(CSV_FIELDS)
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([row[f] for f in fields])
        agg = self.aggregate
        writer.writerow([])
        writer.writerow(["aggregate", "value"])
        for label, value in agg["buckets"].items():
            writer.writerow([label, f"{value:.2f}"])
        writer.writerow(["exact_vm_pct", f"{agg['exact_vm_pct']:.2f}"])
        writer.writerow(["exact_op_pct", f"{agg['exact_op_pct']:.2f}"])
        return buf.getvalue()


def problem_seed(seed: int, set_name: str, index: int) -> int:
    return int(np.random.SeedSequence([seed, zlib.crc32(set_name.encode()), index]).generate_state(1)[0])


def run_problem(p: ProblemSpec, cfg: EvolutionConfig, n_samples: Optional[int] = None,
                seed: int = 0) -> BenchmarkResult:
    start = time.perf_counter()
    try:
        d = sample_problem(p, n_samples, seed)
        run = evolve(d, replace(cfg, seed=problem_seed(cfg.seed, p.set_name, p.index)))
    except Exception as exc:  # one broken problem must not sink the suite
        return BenchmarkResult(p, Const(1), -1.0, composite_metric(-1.0, 0, 0), MatchFlags(0, 0),
                               0, time.perf_counter() - start, f"error: {exc}")
    best = run.best_expression
    r2 = Evaluator(d).metrics(best).r2
    flags = MatchFlags(variable_set_match(p.ground_truth, best), operation_set_match(p.ground_truth, best))
    status = run.status.value if isinstance(run.status, RunStatus) else str(run.status)
    return BenchmarkResult(p, best, r2, composite_metric(r2, flags), flags,
                           run.generations_used, time.perf_counter() - start, status)


def run_suite(set_name: str, cfg: Optional[EvolutionConfig] = None, n_samples: Optional[int] = None,
              seed: int = 0, on_result: Optional[Callable[[BenchmarkResult], None]] = None) -> SuiteReport:
    cfg = cfg or EvolutionConfig()
    problems = registry(set_name)
    results = []
    for p in problems:
        result = run_problem(p, cfg, n_samples, seed)
        results.append(result)
        if on_result is not None:
            on_result(result)
    return SuiteReport(set_name, cfg, n_samples or DEFAULT_SAMPLES, seed, results)


_NUM = {"oneOf": [{"type": "number"}, {"enum": ["inf", "-inf", "nan"]}]}

SUITE_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["set", "config", "per_problem", "aggregate"],
    "additionalProperties": False,
    "properties": {
        "set": {"enum": list(SET_NAMES)},
        "config": {"type": "object"},
        "per_problem": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["index", "ground_truth", "best_expression", "r2", "variable_match",
                             "operation_match", "composite_metric", "generations_used", "status"],
                "additionalProperties": False,
                "properties": {
                    "index": {"type": "integer", "minimum": 1},
                    "ground_truth": {"type": "string"},
                    "best_expression": {"type": "string"},
                    "r2": _NUM,
                    "variable_match": {"enum": [0, 1]},
                    "operation_match": {"enum": [0, 1]},
                    "composite_metric": _NUM,
                    "generations_used": {"type": "integer", "minimum": 0},
                    "status": {"type": "string"},
                    "wall_time": {"type": "number", "minimum": 0},
                },
            },
        },
        "aggregate": {
            "type": "object",
            "required": ["buckets", "exact_vm_pct", "exact_op_pct", "problems"],
            "additionalProperties": False,
            "properties": {
                "buckets": {
                    "type": "object",
                    "required": list(R2_BUCKETS),
                    "additionalProperties": False,
                    "properties": {label: {"type": "number", "minimum": 0, "maximum": 100} for label in R2_BUCKETS},
                },
                "exact_vm_pct": {"type": "number", "minimum": 0, "maximum": 100},
                "exact_op_pct": {"type": "number", "minimum": 0, "maximum": 100},
                "problems": {"type": "integer", "minimum": 0},
            },
        },
    },
}
