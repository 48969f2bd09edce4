"""Similarity-guided symbolic regression."""

from .expr import (
    BinaryOp, Binary, Const, Expr, NamedConstant, ParseError, UnaryOp, Unary, Var,
    complexity, depth, free_variables, parse, render, simplify, size, subexpressions,
    substitute, truncate,
)
from .numeric import Dataset, EvalMetrics, Evaluator, PenaltyContext, compile_expr, is_valid, metrics, penalty
from .similarity import find_similar, nearest_neighbors, similarity, tree_edit_distance
from .relevance import assess_relevance, sort_by_relevance
from .evolution import ConfigError, EvolutionConfig, RunResult, RunStatus, evolve
from .benchmarks import composite_metric, get_problem, registry, run_suite, sample_problem
from .explain import ExplanationReport, NoResult, explain

__version__ = "0.1.0"
