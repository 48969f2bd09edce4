"""Basic and advanced explanation reports for a finished run."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .evolution import RunResult
from .expr import Const, Expr
from .numeric import Dataset, EvalMetrics, Evaluator, PenaltyContext, _json_float
from .similarity import nearest_neighbors

LEVELS = ("none", "basic", "advanced")
N_NEIGHBORS = 5


class NoResult(RuntimeError):
    """The run produced no expression with valid metrics."""


@dataclass
class ExplanationReport:
    level: str
    best_expression: str
    metrics: EvalMetrics
    term_breakdown: list = field(default_factory=list)
    neighbors: list = field(default_factory=list)
    insights: Optional[dict] = None

    def to_dict(self) -> dict:
        terms = [
            {"term": t["term"], "kind": t["kind"],
             "metrics": None if t["metrics"] is None else t["metrics"].to_dict()}
            for t in self.term_breakdown
        ]
        neighbors = [
            {"expression": n["expression"], "similarity": n["similarity"], "fitness": _json_float(n["fitness"])}
            for n in self.neighbors
        ]
        insights = None
        if self.insights is not None:
            insights = {k: _json_float(v) if isinstance(v, float) else v for k, v in self.insights.items()}
        return {
            "level": self.level,
            "best_expression": self.best_expression,
            "metrics": self.metrics.to_dict(),
            "term_breakdown": terms,
            "neighbors": neighbors,
            "insights": insights,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExplanationReport":
        terms = [
            {"term": t["term"], "kind": t["kind"],
             "metrics": None if t["metrics"] is None else EvalMetrics.from_dict(t["metrics"])}
            for t in data["term_breakdown"]
        ]
        neighbors = [
            {"expression": n["expression"], "similarity": float(n["similarity"]), "fitness": float(n["fitness"])}
            for n in data["neighbors"]
        ]
        insights = data.get("insights")
        if insights is not None:
            insights = {k: float(v) if k != "verdict" else v for k, v in insights.items()}
        return cls(data["level"], data["best_expression"], EvalMetrics.from_dict(data["metrics"]),
                   terms, neighbors, insights)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        m = self.metrics
        lines = [
            "Basic Explanation:",
            f"Best Expression: {self.best_expression}",
            f"Fitness: {m.fitness}",
            f"Mean Squared Error: {m.mse}",
            f"R-squared: {m.r2}",
            f"Relative Improvement: {m.relative_improvement}",
            f"Expression Complexity: {_count(m.complexity)}",
            f"Correlation: {m.pearson}",
            f"Spearman Correlation: {m.spearman}",
            f"Cosine Similarity: {m.cosine_sim}",
            f"Euclidean Similarity: {m.euclidean_sim}",
        ]
        if self.level != "advanced":
            return "\n".join(lines) + "\n"
        lines += ["", f"Advanced Explanation for {self.best_expression}:", "", "Expression Breakdown:"]
        for t in self.term_breakdown:
            lines.append(f"Term: {t['term']}")
            tm = t["metrics"]
            if tm is None:
                lines.append("Contribution: Constant term")
                continue
            lines += [
                f"Fitness: {tm.fitness:.4f}",
                f"MSE Contribution: {tm.mse:.4f}",
                f"Complexity: {_count(tm.complexity)}",
                f"Correlation: {tm.pearson:.4f}",
                f"Spearman Correlation: {tm.spearman:.4f}",
                f"Cosine Similarity: {tm.cosine_sim:.4f}",
                f"Euclidean Similarity: {tm.euclidean_sim:.4f}",
                f"R-squared: {tm.r2:.4f}",
                f"Relative Improvement: {tm.relative_improvement:.4f}",
            ]
        lines += ["", "Neighbor Similarity Analysis:"]
        for i, n in enumerate(self.neighbors, 1):
            lines += [
                f"Neighbor {i}:",
                f"Expression: {n['expression']}",
                f"Similarity: {n['similarity']:.4f}",
                f"Fitness: {n['fitness']:.4f}",
            ]
        ins = self.insights
        lines += [
            "",
            "Insights:",
            f"Average Neighbor Fitness: {ins['avg_neighbor_fitness']:.4f}",
            f"Best Expression Fitness: {ins['best_fitness']:.4f}",
        ]
        if ins["verdict"] == "local_optimum":
            lines.append("Verdict: the best expression beats its neighbors on average (local optimum).")
        else:
            lines.append("Verdict: neighbors score as well as the best expression; further optimization may help.")
        return "\n".join(lines) + "\n"


def _count(v: float):
    return int(v) if math.isfinite(v) and v == int(v) else v


def terms_of(e: Expr) -> tuple[Expr, ...]:
    """Immediate arguments of the root, or the expression itself for a leaf."""
    return e.children or (e,)


def _checked(run: RunResult, d: Dataset, evaluator: Optional[Evaluator]):
    if not run.found:
        raise NoResult("the run returned the fallback constant without valid metrics")
    ev = evaluator or Evaluator(d)
    m = ev.metrics(run.best_expression, run.context)
    if m.is_failure:
        raise NoResult(f"best expression {run.best_expression.key} has no valid metrics on this data")
    return ev, m


def basic_report(run: RunResult, d: Dataset, evaluator: Optional[Evaluator] = None) -> ExplanationReport:
    _, m = _checked(run, d, evaluator)
    return ExplanationReport("basic", run.best_expression.key, m)


def advanced_report(run: RunResult, population: Optional[Sequence[Expr]], d: Dataset,
                    evaluator: Optional[Evaluator] = None) -> ExplanationReport:
    ev, m = _checked(run, d, evaluator)
    ctx: PenaltyContext = run.context
    best = run.best_expression
    breakdown = []
    for term in terms_of(best):
        if isinstance(term, Const):
            breakdown.append({"term": term.key, "kind": "constant", "metrics": None})
        else:
            breakdown.append({"term": term.key, "kind": "dynamic", "metrics": ev.metrics(term, ctx)})
    population = run.population if population is None else population
    neighbors = [
        {"expression": n.key, "similarity": sim, "fitness": ev.metrics(n, ctx).fitness}
        for n, sim in nearest_neighbors(best, population, N_NEIGHBORS)
    ]
    avg = sum(n["fitness"] for n in neighbors) / len(neighbors) if neighbors else 0.0
    insights = {
        "avg_neighbor_fitness": avg,
        "best_fitness": m.fitness,
        "verdict": "local_optimum" if m.fitness > avg else "further_optimization",
    }
    return ExplanationReport("advanced", best.key, m, breakdown, neighbors, insights)


def explain(run: RunResult, d: Dataset, level: str = "basic",
            population: Optional[Sequence[Expr]] = None) -> Optional[ExplanationReport]:
    if level not in LEVELS:
        raise ValueError(f"explain level must be one of {LEVELS}")
    if level == "none":
        return None
    if level == "basic":
        return basic_report(run, d)
    return advanced_report(run, population, d)
