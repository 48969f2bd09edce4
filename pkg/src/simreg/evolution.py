"""Evolutionary search over expression trees.

All stochastic choices are drawn from one seeded numpy Generator owned by
the orchestrator, in program order, so a run is reproducible for a given
dataset, config and seed. Parallel fitness evaluation consumes no randomness.
"""

from __future__ import annotations

import enum
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .expr import (
    BINARY_OPS,
    CONSTANT_POOL,
    UNARY_OPS,
    Binary,
    BinaryOp,
    Const,
    Expr,
    Unary,
    Var,
    canonical_key,
    parse,
    subexpressions,
    substitute,
    truncate,
)
from .numeric import Dataset, EvalMetrics, Evaluator, PenaltyContext, is_valid
from .relevance import METRICS as RELEVANCE_METRICS
from .relevance import assess_relevance, sort_by_relevance
from .similarity import find_similar, similarity

BASE_DEPTH = 2
FITNESS_TOLERANCE = 1e-6
VALIDITY_GATE = 1e-10
STAGNATION_LIMIT = 5
MAX_FILL_ATTEMPTS = 10
EXCEED_RATIO = 0.5
BASE_ELITE = 0.05
MAX_ELITE = 0.2
SHAPES = ("simple", "unary", "binary", "complex")
MUTATIONS = ("replace", "add", "remove")


class ConfigError(ValueError):
    pass


class RunStatus(str, enum.Enum):
    COMPLETED = "completed"
    EARLY_STOPPED = "early_stopped"
    TIMEOUT = "timeout"
    NO_EXPRESSION = "no_expression"
    ABORTED_MAX_DEPTH = "aborted_max_depth"
    ABORTED_REINIT_LIMIT = "aborted_reinit_limit"

    @property
    def aborted(self) -> bool:
        return self in (RunStatus.ABORTED_MAX_DEPTH, RunStatus.ABORTED_REINIT_LIMIT)


@dataclass
class EvolutionConfig:
    population_size: int = 50
    generations: int = 50
    similarity_threshold: float = 0.7
    dynamic_similarity_threshold: bool = True
    elite_percentage: float = 0.05
    dynamic_elite: bool = True
    max_depth: Optional[int] = None
    force_all_variables: bool = False
    variable_inclusion_strategy: str = "guided"
    relevance_metric: str = "both"
    early_stopping_metric: Optional[str] = None
    early_stopping_value: Optional[float] = None
    patience: int = 0
    max_time: Optional[float] = None
    last_resort: bool = False
    user_expression: Optional[Union[Expr, str]] = None
    diversity_weight: float = 0.3
    seed: int = 42
    worker_count: int = 1
    eval_timeout: float = 5.0

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(isinstance(self.population_size, int) and self.population_size >= 1, "population_size must be a positive integer")
        need(isinstance(self.generations, int) and self.generations >= 1, "generations must be a positive integer")
        need(0 < self.similarity_threshold <= 1, "similarity_threshold must be in (0, 1]")
        need(0 < self.elite_percentage <= 1, "elite_percentage must be a float between 0 and 1")
        need(self.max_depth is None or (isinstance(self.max_depth, int) and self.max_depth >= 1),
             "max_depth must be a positive integer")
        need(self.variable_inclusion_strategy in ("guided", "probabilistic"),
             "variable_inclusion_strategy must be 'guided' or 'probabilistic'")
        need(self.relevance_metric in RELEVANCE_METRICS, f"relevance_metric must be one of {RELEVANCE_METRICS}")
        if self.early_stopping_metric is not None:
            need(self.early_stopping_metric in ("fitness", "r2", "mse"),
                 "early_stopping_metric must be one of fitness, r2, mse")
            need(self.early_stopping_value is not None,
                 "early_stopping_value must be provided when early_stopping_metric is set")
        need(isinstance(self.patience, int) and self.patience >= 0, "patience must be a nonnegative integer")
        need(self.max_time is None or self.max_time >= 0, "max_time must be nonnegative")
        need(0 <= self.diversity_weight <= 1, "diversity_weight must be in [0, 1]")
        need(isinstance(self.worker_count, int) and self.worker_count >= 1, "worker_count must be a positive integer")
        need(self.eval_timeout > 0, "eval_timeout must be positive")
        if isinstance(self.user_expression, str):
            try:
                parse(self.user_expression)
            except ValueError as exc:
                raise ConfigError(f"invalid user_expression: {exc}") from None

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.user_expression is not None:
            out["user_expression"] = str(self.user_expression)
        return out


@dataclass
class EvolutionState:
    population: list = field(default_factory=list)
    generation: int = -1
    best_expression: Optional[Expr] = None
    best_fitness: float = -math.inf
    best_r2: float = -math.inf
    best_mse: float = math.inf
    stagnant_generations: int = 0
    reinit_attempts: int = 0
    diversity: float = 0.0
    current_similarity_threshold: float = 0.7
    current_elite_percentage: float = 0.05
    mutation_rate: float = 0.2
    diversity_weight: float = 0.3
    last_resort_active: bool = False
    early_stop_counter: int = 0
    max_depth: int = 4
    elapsed: float = 0.0


@dataclass
class RunResult:
    best_expression: Expr
    best_fitness: float
    best_r2: float
    best_mse: float
    status: RunStatus
    generations_used: int
    wall_time: float
    population: list
    context: PenaltyContext
    log: list
    max_depth: int
    missing_variables_cause: Optional[str] = None
    warnings: list = field(default_factory=list)

    @property
    def found(self) -> bool:
        return math.isfinite(self.best_fitness)


def population_diversity(population: Sequence[Expr]) -> float:
    """Fraction of structurally unique members; 0 for an empty population."""
    if not population:
        return 0.0
    return len({canonical_key(e) for e in population}) / len(population)


class Evolver:
    """One search run over a fixed dataset and config."""

    def __init__(self, dataset: Dataset, cfg: EvolutionConfig,
                 on_generation: Optional[Callable[[dict], None]] = None):
        cfg.validate()
        self.dataset = dataset
        self.cfg = cfg
        self.on_generation = on_generation
        self.warnings: list[str] = []
        self.rng = np.random.default_rng(cfg.seed)
        self.schema = dataset.names
        self.variables = tuple(Var(n) for n in self.schema)
        self.all_names = frozenset(self.schema)
        self.leaf_pool = self.variables + CONSTANT_POOL

        min_depth = BASE_DEPTH + (len(self.variables) if cfg.force_all_variables else 2)
        if cfg.max_depth is None:
            max_depth = min_depth
        elif cfg.max_depth < min_depth:
            self._warn(f"max_depth={cfg.max_depth} is below the minimum {min_depth}; using {min_depth}")
            max_depth = min_depth
        else:
            max_depth = cfg.max_depth
        self.initial_max_depth = max_depth
        self.max_allowed_depth = 2 * max_depth

        self.relevance = assess_relevance(dataset, cfg.relevance_metric, seed=cfg.seed)
        self.sorted_vars = tuple(Var(n) for n in sort_by_relevance(self.relevance))
        self.evaluator = Evaluator(dataset, cfg.eval_timeout)

        self.state = EvolutionState(
            current_similarity_threshold=cfg.similarity_threshold,
            current_elite_percentage=cfg.elite_percentage,
            diversity_weight=cfg.diversity_weight,
            max_depth=max_depth,
        )
        self.user_expression = self._sanitize_user(cfg.user_expression)
        self._start = time.perf_counter()
        self.ctx = self._context(0)

    # --- helpers ----------------------------------------------------------

    def _warn(self, msg: str) -> None:
        self.warnings.append(msg)
        warnings.warn(msg, stacklevel=3)

    def _rand(self) -> float:
        return float(self.rng.random())

    def _pick(self, seq: Sequence):
        return seq[int(self.rng.integers(len(seq)))]

    @property
    def max_depth(self) -> int:
        return self.state.max_depth

    def _time_exceeded(self) -> bool:
        return self.cfg.max_time is not None and time.perf_counter() - self._start > self.cfg.max_time

    def _missing(self, e: Expr) -> list[Var]:
        return [v for v in self.variables if v.name not in e.variables]

    def _has_all(self, e: Expr) -> bool:
        return self.all_names <= e.variables

    def _valid(self, e: Expr) -> bool:
        return is_valid(e, self.schema)

    def _context(self, generation: int) -> PenaltyContext:
        s = self.state
        return PenaltyContext(
            generation=generation,
            total_generations=self.cfg.generations,
            best_fitness_overall=s.best_fitness,
            population_diversity=s.diversity,
            max_depth=s.max_depth,
            last_resort_active=s.last_resort_active,
        )

    def _sanitize_user(self, user) -> Optional[Expr]:
        if user is None:
            return None
        e = parse(user) if isinstance(user, str) else user
        if e.depth > self.max_depth:
            self._warn("user expression exceeds max_depth; truncating")
            e = truncate(e, self.max_depth)
        unknown = sorted(e.variables - self.all_names)
        if unknown:
            self._warn(f"user expression variables {unknown} are not in the data; substituting 0")
            for name in unknown:
                e = substitute(e, Var(name), Const(0))
        return e

    # --- generation -------------------------------------------------------

    def generate_leaf(self) -> Expr:
        return self._pick(self.leaf_pool)

    def generate_random_expression(self, depth: int = 0, used_vars: Optional[set] = None) -> Expr:
        """Random tree whose depth fits in ``max_depth - depth`` levels."""
        if self._time_exceeded():
            return Const(1)
        if used_vars is None:
            used_vars = set()
        budget = self.max_depth - depth
        if budget <= 1 or (depth > 0 and self._rand() < 0.3):
            if self._rand() < 0.9:
                available = [v for v in self.variables if v not in used_vars]
                expr = self._pick(available) if available else self._pick(self.variables)
                used_vars.add(expr)
            else:
                expr = self._pick(CONSTANT_POOL)
            if self.cfg.force_all_variables:
                for v in self.variables:
                    if v not in used_vars and expr.depth + 1 <= budget:
                        expr = Binary(BinaryOp.ADD, expr, v)
                        used_vars.add(v)
            return expr

        op_kind = "unary" if self._rand() < 0.5 else "binary"
        for _ in range(5):
            if self._time_exceeded():
                return Const(1)
            if op_kind == "unary":
                op = self._pick(UNARY_OPS)
                child = self.generate_random_expression(depth + 1, used_vars)
                if child.depth + 1 > budget:
                    continue
                expr = Unary(op, child)
            else:
                op = self._pick(BINARY_OPS)
                left = self.generate_random_expression(depth + 1, used_vars)
                right = self.generate_random_expression(depth + 1, used_vars)
                if max(left.depth, right.depth) + 1 > budget:
                    continue
                expr = Binary(op, left, right)
            if self._valid(expr):
                used_vars.update(Var(n) for n in expr.variables)
                if self.user_expression is not None and self._rand() < 0.1:
                    expr = self._insert_user_subtree(expr, budget)
                return expr

        fallback = self._pick(self.leaf_pool)
        if self.cfg.force_all_variables:
            for v in self.variables:
                if v.name not in fallback.variables and fallback.depth + 1 <= budget:
                    fallback = Binary(BinaryOp.ADD, fallback, v)
        return fallback

    def _insert_user_subtree(self, expr: Expr, budget: int) -> Expr:
        target = self._pick(subexpressions(expr))
        grafted = substitute(expr, target, self.user_expression)
        return grafted if grafted.depth <= budget else expr

    def _augment(self, expr: Expr, strategy: str, coin: bool) -> Expr:
        """Add missing variables while depth permits.

        guided walks the relevance order; probabilistic walks dataset order and
        always flips a fair coin. ``coin`` adds the coin flip to guided too.
        """
        missing = {v.name for v in self._missing(expr)}
        if not missing:
            return expr
        order = self.sorted_vars if strategy == "guided" else self.variables
        for v in order:
            if v.name not in missing:
                continue
            if (coin or strategy == "probabilistic") and self._rand() >= 0.5:
                continue
            candidate = Binary(BinaryOp.ADD, expr, v)
            if candidate.depth <= self.max_depth:
                expr = candidate
                missing.discard(v.name)
        return expr

    def _reinsert(self, expr: Expr) -> Expr:
        if not self.cfg.force_all_variables:
            return expr
        return self._augment(expr, self.cfg.variable_inclusion_strategy, coin=True)

    def initialize_population(self) -> list[Expr]:
        cfg = self.cfg
        n = cfg.population_size - (1 if self.user_expression is not None else 0)
        shapes = [self._pick(SHAPES) for _ in range(n)]
        population = []
        for shape in shapes:
            if self._time_exceeded():
                break
            if shape == "simple":
                expr = self.generate_leaf()
            elif shape == "unary":
                op = self._pick(UNARY_OPS)
                expr = Unary(op, self.generate_leaf())
            elif shape == "binary":
                op = self._pick(BINARY_OPS)
                expr = Binary(op, self.generate_leaf(), self.generate_leaf())
            else:
                expr = self.generate_random_expression()
            if expr.depth > self.max_depth:
                expr = truncate(expr, self.max_depth)
            if cfg.force_all_variables:
                expr = self._augment(expr, cfg.variable_inclusion_strategy, coin=False)
            population.append(expr)
        if self.user_expression is not None:
            population.append(self.user_expression)
        self.state.population = population
        return population

    # --- genetic operators ------------------------------------------------

    def mutate(self, e: Expr) -> Expr:
        kind = self._pick(MUTATIONS)
        for _ in range(5):
            if kind == "replace":
                target = self._pick(subexpressions(e))
                fresh = self.generate_random_expression()
                if e.depth - target.depth + fresh.depth > self.max_depth:
                    continue
                candidate = substitute(e, target, fresh)
            elif kind == "add":
                fresh = self.generate_random_expression()
                if max(e.depth, fresh.depth) + 1 > self.max_depth:
                    continue
                candidate = Binary(self._pick(BINARY_OPS), e, fresh)
            else:
                # dropping a base or exponent of a power is not meaningful
                if not isinstance(e, Binary) or e.op is BinaryOp.POW:
                    continue
                dropped = int(self.rng.integers(2))
                candidate = e.children[1 - dropped]
            if candidate.depth > self.max_depth:
                continue
            if candidate != e and similarity(e, candidate) < 0.9:
                return self._reinsert(candidate)
        return self.generate_random_expression()

    def crossover(self, e1: Expr, e2: Expr) -> Expr:
        for _ in range(5):
            s1 = self._pick(subexpressions(e1))
            s2 = self._pick(subexpressions(e2))
            if e1.depth - s1.depth + s2.depth > self.max_depth or e2.depth - s2.depth + s1.depth > self.max_depth:
                continue
            child1 = substitute(e1, s1, s2)
            child2 = substitute(e2, s2, s1)
            child = self._pick((child1, child2))
            if child.depth > self.max_depth:
                continue
            if child != e1 and child != e2 and similarity(e1, child) < 0.9:
                return self._reinsert(child)
        return self.generate_random_expression()

    def merge(self, e1: Expr, e2: Expr) -> Expr:
        op = self._pick((BinaryOp.ADD, BinaryOp.MUL))
        merged = Binary(op, e1, e2)
        if merged.depth > self.max_depth:
            return self.generate_random_expression()
        if self.cfg.force_all_variables:
            for v in self._missing(merged):
                if merged.depth + 1 <= self.max_depth:
                    merged = Binary(BinaryOp.ADD, merged, v)
        return merged

    # --- selection --------------------------------------------------------

    def select_diverse(self, scored: Sequence[tuple[Expr, float]]) -> Expr:
        n = len(scored)
        if n == 0:
            raise ValueError("empty population")
        if n == 1:
            return scored[0][0]
        exprs = [e for e, _ in scored]
        sims = np.array([[similarity(a, b) for b in exprs] for a in exprs])
        mean_sim = (sims.sum(axis=1) - np.diag(sims)) / (n - 1)
        diversity = 1.0 - mean_sim
        fitness = np.array([f for _, f in scored], dtype=float)
        w = self.state.diversity_weight
        weights = np.clip((1 - w) * fitness + w * diversity, 0.0, None)
        total = weights.sum()
        probs = weights / total if total > 0 else np.full(n, 1.0 / n)
        return exprs[int(self.rng.choice(n, p=probs))]

    def select_similar(self, target: Expr, scored: Sequence[tuple[Expr, float]]) -> Expr:
        others = [e for e, _ in scored if e != target]
        if not others:
            raise ValueError("population has no member other than the target")
        threshold = self.state.current_similarity_threshold
        close = [e for e in others if similarity(target, e) >= threshold]
        return self._pick(close if close else others)

    # --- schedules --------------------------------------------------------

    def update_similarity_threshold(self, diversity: float) -> float:
        s = self.state
        s.diversity = diversity
        if self.cfg.dynamic_similarity_threshold:
            s.current_similarity_threshold = min(0.9, max(0.1, self.cfg.similarity_threshold * (1 - diversity)))
        return s.current_similarity_threshold

    def update_elite_percentage(self, generation: int) -> float:
        s = self.state
        if self.cfg.dynamic_elite:
            progress = generation / self.cfg.generations
            pct = BASE_ELITE + progress * (1 - s.diversity) * (MAX_ELITE - BASE_ELITE)
            s.current_elite_percentage = max(BASE_ELITE, min(MAX_ELITE, pct))
        return s.current_elite_percentage

    def activate_last_resort(self) -> None:
        s = self.state
        s.max_depth = min(s.max_depth + 5, self.max_allowed_depth)
        s.mutation_rate = 0.85
        s.diversity_weight = 0.1
        s.last_resort_active = True

    # --- population maintenance -------------------------------------------

    def prune(self) -> list[Expr]:
        s = self.state
        seen = {}
        for e in s.population:
            if not self._valid(e):
                continue
            seen.setdefault(canonical_key(e), e)
        population = list(seen.values())
        if self.cfg.force_all_variables:
            population = [e for e in population if self._has_all(e)]
        if len(population) > self.cfg.population_size:
            fitness = [self.evaluator.metrics(e, self.ctx).fitness for e in population]
            order = sorted(range(len(population)), key=lambda i: -fitness[i])
            population = [population[i] for i in order[: self.cfg.population_size]]
        s.population = population
        return population

    def check_diversity(self) -> list[Expr]:
        s = self.state
        if not s.population or population_diversity(s.population) >= 0.5:
            return s.population
        num_new = int(self.cfg.population_size * 0.2)
        if num_new == 0:
            return s.population
        fresh = [self.generate_random_expression() for _ in range(num_new)]
        s.population = s.population[:-num_new] + fresh
        return s.population

    def missing_variables_cause(self, best: Expr) -> Optional[str]:
        if not self.cfg.force_all_variables or self._has_all(best):
            return None
        causes = []
        if best.depth >= self.max_depth:
            causes.append(f"expression reached max depth ({self.max_depth})")
        if self.cfg.variable_inclusion_strategy == "probabilistic":
            causes.append("probabilistic inclusion may have skipped variables")
        if len(self.state.population) < self.cfg.population_size:
            causes.append("population shrank during evolution")
        if self.state.last_resort_active:
            causes.append("last resort mode was active")
        if not causes:
            causes.append("unknown; consider more generations or other settings")
        return ", ".join(causes)

    # --- main loop --------------------------------------------------------

    def _evaluate(self, population: list[Expr], pool) -> list[EvalMetrics]:
        if pool is not None and len(population) > 1:
            # workers only fill the context-free score cache
            list(pool.map(self.evaluator.scores, population))
        return [self.evaluator.metrics(e, self.ctx) for e in population]

    def _emit(self, record: dict) -> None:
        self.log.append(record)
        if self.on_generation is not None:
            self.on_generation(record)

    def _record(self, generation: int, events: list[str], **extra) -> dict:
        s = self.state
        record = {
            "generation": generation,
            "best_fitness": s.best_fitness if math.isfinite(s.best_fitness) else None,
            "best_expression": None if s.best_expression is None else s.best_expression.key,
            "diversity": s.diversity,
            "similarity_threshold": s.current_similarity_threshold,
            "elite_percentage": s.current_elite_percentage,
            "mutation_rate": s.mutation_rate,
            "max_depth": s.max_depth,
            "population_size": len(s.population),
            "events": events,
        }
        record.update(extra)
        return record

    def run(self) -> RunResult:
        cfg = self.cfg
        s = self.state
        self.log: list[dict] = []
        self._start = time.perf_counter()
        status = RunStatus.COMPLETED
        pool = ThreadPoolExecutor(max_workers=cfg.worker_count) if cfg.worker_count > 1 else None
        try:
            self.initialize_population()
            max_reinits = int(0.9 * cfg.generations)
            for generation in range(cfg.generations):
                if self._time_exceeded():
                    status = RunStatus.TIMEOUT
                    self._emit(self._record(generation, ["timeout"]))
                    break
                s.generation = generation
                events = []
                if (cfg.last_resort and not s.last_resort_active
                        and generation >= int(0.9 * cfg.generations) and s.best_fitness < 0.85):
                    self.activate_last_resort()
                    events.append("last_resort")

                s.diversity = population_diversity(s.population)
                self.ctx = self._context(generation)
                scores = self._evaluate(s.population, pool)
                survivors = [(e, m) for e, m in zip(s.population, scores) if m.fitness > VALIDITY_GATE]
                if not survivors:
                    s.reinit_attempts += 1
                    if s.reinit_attempts > max_reinits:
                        status = RunStatus.ABORTED_REINIT_LIMIT
                        self._emit(self._record(generation, events + ["abort_reinit_limit"]))
                        break
                    self.initialize_population()
                    self._emit(self._record(generation, events + ["reinitialize_no_survivors"]))
                    continue
                s.reinit_attempts = 0

                if cfg.force_all_variables:
                    survivors.sort(key=lambda item: (self._has_all(item[0]), item[1].fitness), reverse=True)
                else:
                    survivors.sort(key=lambda item: item[1].fitness, reverse=True)
                current, current_m = survivors[0]
                if current_m.fitness > s.best_fitness:
                    s.best_fitness = current_m.fitness
                    s.best_expression = current
                    s.best_r2 = current_m.r2
                    s.best_mse = current_m.mse
                    s.stagnant_generations = 0
                else:
                    s.stagnant_generations += 1

                if cfg.early_stopping_metric is not None:
                    target = cfg.early_stopping_value
                    if cfg.early_stopping_metric == "fitness":
                        hit = current_m.fitness >= target - FITNESS_TOLERANCE
                    elif cfg.early_stopping_metric == "r2":
                        hit = current_m.r2 >= target
                    else:
                        hit = current_m.mse <= target
                    if hit:
                        s.early_stop_counter += 1
                        if s.early_stop_counter >= cfg.patience:
                            status = RunStatus.EARLY_STOPPED
                            self._emit(self._record(generation, events + ["early_stop"]))
                            break
                    else:
                        s.early_stop_counter = 0

                if s.stagnant_generations > STAGNATION_LIMIT:
                    self.initialize_population()
                    s.stagnant_generations = 0
                    self._emit(self._record(generation, events + ["stagnation_reset"]))
                    continue

                if not s.last_resort_active:
                    s.mutation_rate = 0.2 if s.stagnant_generations < STAGNATION_LIMIT else 0.7
                self.update_similarity_threshold(s.diversity)
                self.update_elite_percentage(generation)
                elite_count = max(1, int(s.current_elite_percentage * cfg.population_size))

                aborted = self._fill([e for e, _ in survivors], elite_count, events)
                if aborted:
                    status = RunStatus.ABORTED_MAX_DEPTH
                    self._emit(self._record(generation, events + ["abort_max_depth"]))
                    break
                self.prune()
                all_vars = (sum(self._has_all(e) for e in s.population) / len(s.population)
                            if s.population else 1.0)
                post_prune = len(s.population)
                self.check_diversity()
                self._emit(self._record(generation, events, post_prune_size=post_prune,
                                        all_variables_fraction=all_vars))
        finally:
            if pool is not None:
                pool.shutdown(wait=True)

        wall = time.perf_counter() - self._start
        best = s.best_expression
        if best is None:
            best = Const(1)
            if status is RunStatus.COMPLETED:
                status = RunStatus.NO_EXPRESSION
            self._warn("no expression was found; returning the constant 1")
        return RunResult(
            best_expression=best,
            best_fitness=s.best_fitness,
            best_r2=s.best_r2,
            best_mse=s.best_mse,
            status=status,
            generations_used=s.generation + 1,
            wall_time=wall,
            population=list(s.population),
            context=self.ctx,
            log=self.log,
            max_depth=s.max_depth,
            missing_variables_cause=self.missing_variables_cause(best),
            warnings=list(self.warnings),
        )

    def _fill(self, parents: list[Expr], elite_count: int, events: list[str]) -> bool:
        """Build the next population in place; True means the depth cap was hit."""
        cfg = self.cfg
        s = self.state
        size = cfg.population_size
        new_population = list(parents[:elite_count])
        attempts = 0
        while len(new_population) < size:
            if self._time_exceeded():
                break
            attempts += 1
            if attempts > MAX_FILL_ATTEMPTS:
                remaining = size - len(new_population)
                tries = exceeded = 0
                while len(new_population) < size and tries < 2 * remaining:
                    e = self.generate_random_expression()
                    if e.depth <= self.max_depth:
                        new_population.append(e)
                    else:
                        exceeded += 1
                    tries += 1
                if tries and exceeded / tries > EXCEED_RATIO:
                    s.max_depth += 1
                    events.append("max_depth_increase")
                    if s.max_depth > self.max_allowed_depth:
                        s.population = new_population
                        return True
                break

            if self._rand() < s.mutation_rate:
                child = self.mutate(self._pick(parents))
            else:
                parent = self._pick(parents)
                similar = find_similar(parent, s.population, s.current_similarity_threshold)
                if similar and self._rand() > 0.5:
                    child = self.crossover(parent, self._pick(similar))
                else:
                    child = self.generate_random_expression()
            if cfg.force_all_variables:
                child = self._reinsert(child)
                for v in self._missing(child):
                    child = Binary(BinaryOp.ADD, child, v)
            if child.depth > self.max_depth:
                continue
            new_population.append(child)
        s.population = new_population
        return False


def evolve(d: Dataset, cfg: Optional[EvolutionConfig] = None,
           on_generation: Optional[Callable[[dict], None]] = None) -> RunResult:
    """Run the search and return the best expression with run diagnostics."""
    return Evolver(d, cfg or EvolutionConfig(), on_generation).run()
