"""Command-line entry point: ``simreg fit | benchmark | list-problems``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from typing import Optional, Sequence

import numpy as np

from . import benchmarks
from .evolution import ConfigError, EvolutionConfig, RunStatus, evolve
from .explain import NoResult, explain
from .expr import Var
from .numeric import Dataset, Evaluator, _json_float

EXIT_OK = 0
EXIT_MALFORMED = 2
EXIT_CONFIG = 3
EXIT_ABORTED = 4


class MalformedInput(ValueError):
    pass


def load_csv(path: str, target: Optional[str] = None) -> Dataset:
    """Read a header-first numeric CSV; errors carry line and column numbers."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise MalformedInput(f"{path}: {exc.strerror}") from None
    except (UnicodeDecodeError, csv.Error) as exc:
        raise MalformedInput(f"{path}: {exc}") from None
    if not rows:
        raise MalformedInput(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise MalformedInput(f"{path}, line 1: need at least 2 columns, found {len(header)}")
    for col, name in enumerate(header, 1):
        try:
            Var(name)
        except ValueError:
            raise MalformedInput(f"{path}, line 1, column {col}: invalid column name {name!r}") from None
    if len(set(header)) != len(header):
        raise MalformedInput(f"{path}, line 1: duplicate column names")
    data = []
    for line, row in enumerate(rows[1:], 2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise MalformedInput(f"{path}, line {line}: expected {len(header)} fields, found {len(row)}")
        values = []
        for col, cell in enumerate(row, 1):
            try:
                v = float(cell)
            except ValueError:
                raise MalformedInput(f"{path}, line {line}, column {col}: non-numeric value {cell!r}") from None
            if not math.isfinite(v):
                raise MalformedInput(f"{path}, line {line}, column {col}: non-finite value {cell!r}")
            values.append(v)
        data.append(values)
    if len(data) < 2:
        raise MalformedInput(f"{path}: need at least 2 data rows, found {len(data)}")
    target = target or header[-1]
    if target not in header:
        raise MalformedInput(f"{path}: target column {target!r} not in header")
    arr = np.array(data, dtype=float)
    ti = header.index(target)
    variables = {name: arr[:, i] for i, name in enumerate(header) if i != ti}
    try:
        return Dataset(variables, arr[:, ti])
    except ValueError as exc:
        raise MalformedInput(f"{path}: {exc}") from None


def _add_config_args(p: argparse.ArgumentParser) -> None:
    d = EvolutionConfig()
    g = p.add_argument_group("search")
    g.add_argument("--population-size", "--population", type=int, default=d.population_size)
    g.add_argument("--generations", type=int, default=d.generations)
    g.add_argument("--max-depth", type=int, default=d.max_depth)
    g.add_argument("--similarity-threshold", type=float, default=d.similarity_threshold)
    g.add_argument("--no-dynamic-threshold", action="store_true")
    g.add_argument("--elite-percentage", type=float, default=d.elite_percentage)
    g.add_argument("--no-dynamic-elite", action="store_true")
    g.add_argument("--force-all-variables", action="store_true")
    g.add_argument("--inclusion-strategy", default=d.variable_inclusion_strategy,
                   help="guided or probabilistic")
    g.add_argument("--relevance-metric", default=d.relevance_metric,
                   help="correlation, mutual_information or both")
    g.add_argument("--early-stopping-metric", default=None, help="fitness, r2 or mse")
    g.add_argument("--early-stopping-value", type=float, default=None)
    g.add_argument("--patience", type=int, default=d.patience)
    g.add_argument("--max-time", type=float, default=None, help="seconds")
    g.add_argument("--last-resort", action="store_true")
    g.add_argument("--user-expression", default=None)
    g.add_argument("--seed", type=int, default=d.seed)
    g.add_argument("--workers", type=int, default=d.worker_count)


def _config(args) -> EvolutionConfig:
    cfg = EvolutionConfig(
        population_size=args.population_size,
        generations=args.generations,
        similarity_threshold=args.similarity_threshold,
        dynamic_similarity_threshold=not args.no_dynamic_threshold,
        elite_percentage=args.elite_percentage,
        dynamic_elite=not args.no_dynamic_elite,
        max_depth=args.max_depth,
        force_all_variables=args.force_all_variables,
        variable_inclusion_strategy=args.inclusion_strategy,
        relevance_metric=args.relevance_metric,
        early_stopping_metric=args.early_stopping_metric,
        early_stopping_value=args.early_stopping_value,
        patience=args.patience,
        max_time=args.max_time,
        last_resort=args.last_resort,
        user_expression=args.user_expression,
        seed=args.seed,
        worker_count=args.workers,
    )
    cfg.validate()
    return cfg


def _write(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simreg", description="Similarity-guided symbolic regression")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="search for an expression fitting a CSV file")
    fit.add_argument("input", help="CSV with a header row; numeric cells only")
    fit.add_argument("--target", default=None, help="target column (default: last column)")
    _add_config_args(fit)
    fit.add_argument("--explain-level", choices=("none", "basic", "advanced"), default="none")
    fit.add_argument("--format", choices=("text", "json", "csv"), default="text")
    fit.add_argument("--output", default=None)
    fit.add_argument("--plot-data", default=None, help="write actual,predicted CSV here")
    fit.add_argument("--log-jsonl", default=None, help="write per-generation records here")
    fit.add_argument("--include-timing", action="store_true", help="add wall_time to the result")

    bench = sub.add_parser("benchmark", help="run a problem set")
    bench.add_argument("set", help=f"one of {', '.join(benchmarks.SET_NAMES)}")
    _add_config_args(bench)
    bench.add_argument("--samples", type=int, default=benchmarks.DEFAULT_SAMPLES)
    bench.add_argument("--data-seed", type=int, default=0)
    bench.add_argument("--format", choices=("text", "json", "csv"), default="text")
    bench.add_argument("--output", default=None)
    bench.add_argument("--include-timing", action="store_true")

    lp = sub.add_parser("list-problems", help="print the problem registry")
    lp.add_argument("--set", default=None)
    lp.add_argument("--format", choices=("text", "json", "csv"), default="text")
    lp.add_argument("--output", default=None)
    return parser


def _fit(args) -> int:
    try:
        d = load_csv(args.input, args.target)
    except MalformedInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    try:
        cfg = _config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    log_fh = open(args.log_jsonl, "w", encoding="utf-8") if args.log_jsonl else None
    try:
        sink = (lambda rec: log_fh.write(json.dumps(rec, default=_json_float) + "\n")) if log_fh else None
        run = evolve(d, cfg, on_generation=sink)
    finally:
        if log_fh:
            log_fh.close()

    ev = Evaluator(d)
    best = run.best_expression
    m = ev.metrics(best, run.context)
    record = {
        "best_expression": best.key,
        "metrics": m.to_dict(),
        "generations_used": run.generations_used,
        "status": run.status.value,
        "max_depth": run.max_depth,
        "missing_variables_cause": run.missing_variables_cause,
    }
    if args.include_timing:
        record["wall_time"] = run.wall_time
    report = None
    if args.explain_level != "none":
        try:
            report = explain(run, d, args.explain_level)
            record["explanation"] = report.to_dict()
        except NoResult as exc:
            record["explanation"] = None
            record["explanation_error"] = str(exc)

    if args.format == "json":
        text = json.dumps(record, indent=2) + "\n"
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        metric_names = list(record["metrics"])
        w.writerow(["best_expression", "status", "generations_used"] + metric_names)
        w.writerow([best.key, run.status.value, run.generations_used] + [record["metrics"][k] for k in metric_names])
        text = buf.getvalue()
        if report is not None:
            text += "\n" + report.to_text()
    else:
        lines = [
            f"Best expression: {best.key}",
            f"Status: {run.status.value}",
            f"Generations used: {run.generations_used}",
        ]
        if args.include_timing:
            lines.append(f"Wall time: {run.wall_time:.3f} s")
        lines += [f"{k}: {v}" for k, v in record["metrics"].items()]
        if run.missing_variables_cause:
            lines.append(f"Missing variables cause: {run.missing_variables_cause}")
        text = "\n".join(lines) + "\n"
        if report is not None:
            text += "\n" + report.to_text()
        elif "explanation_error" in record:
            text += f"\nNo explanation: {record['explanation_error']}\n"
    _write(text, args.output)

    if args.plot_data:
        pred = ev.predict(best)
        with open(args.plot_data, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["actual", "predicted"])
            for a, p in zip(d.target, pred):
                w.writerow([repr(float(a)), repr(float(p))])

    return EXIT_ABORTED if run.status.aborted else EXIT_OK


def _benchmark(args) -> int:
    if args.set not in benchmarks.SET_NAMES:
        print(f"error: unknown problem set {args.set!r}; expected one of {', '.join(benchmarks.SET_NAMES)}",
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = _config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    def progress(r):
        print(f"{r.problem.name}: r2={r.r2:.4f} vm={r.flags.variable_match} "
              f"op={r.flags.operation_match} status={r.status}", file=sys.stderr)

    report = benchmarks.run_suite(args.set, cfg, args.samples, args.data_seed, on_result=progress)
    if args.format == "json":
        text = report.to_json(args.include_timing) + "\n"
    elif args.format == "csv":
        text = report.to_csv(args.include_timing)
    else:
        agg = report.aggregate
        lines = [f"{'#':>3}  {'r2':>10}  vm  op  {'cm':>8}  expression"]
        for r in report.results:
            lines.append(f"{r.problem.index:>3}  {r.r2:>10.4f}  {r.flags.variable_match:>2}  "
                         f"{r.flags.operation_match:>2}  {r.composite_metric:>8.4f}  {r.best_expression.key}")
        lines.append("")
        for label, pct in agg["buckets"].items():
            lines.append(f"{label:>8}: {pct:6.2f}%")
        lines.append(f"Exact VM: {agg['exact_vm_pct']:.2f}%")
        lines.append(f"Exact OP: {agg['exact_op_pct']:.2f}%")
        text = "\n".join(lines) + "\n"
    _write(text, args.output)
    return EXIT_OK


def _list_problems(args) -> int:
    try:
        rows = benchmarks.registry_export(args.set)
    except benchmarks.UnknownSet as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    if args.format == "json":
        text = json.dumps(rows, indent=2) + "\n"
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["set", "index", "expression", "ranges"])
        for r in rows:
            w.writerow([r["set"], r["index"], r["expression"], json.dumps(r["ranges"])])
        text = buf.getvalue()
    else:
        text = "".join(
            f"{r['set']:<12} {r['index']:>3}  {r['expression']}  "
            + " ".join(f"{k}∈({lo:g}, {hi:g})" for k, (lo, hi) in r["ranges"].items()) + "\n"
            for r in rows
        )
    _write(text, args.output)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if args.command == "fit":
            return _fit(args)
        if args.command == "benchmark":
            return _benchmark(args)
        return _list_problems(args)


if __name__ == "__main__":
    sys.exit(main())
