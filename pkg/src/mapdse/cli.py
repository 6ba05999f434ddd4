"""Command-line entry points.

Subcommands:
    run         run an experiment file and write CSVs, figures, metadata
    exhaustive  simulate every mapping of a small problem
    gen         generate a benchmark problem file from named presets
    eval        validate and simulate a single mapping
    validate    check a problem file and print diagnostics

Exit codes: 0 success, 1 usage error, 2 invalid input (problem,
experiment, or mapping), 3 I/O or runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .errors import DseError
from .harness import (
    PRESETS,
    ComparisonTable,
    ExperimentResult,
    exhaustive,
    emit_results,
    load_experiment,
    run_experiment,
    write_benchmark,
)
from .heuristics import HEURISTICS
from .metrics import imbalance, makespan
from .model import Problem, load_problem, mapping_space_size, validate_problem
from .simulator import SimConfig, objective_time, simulate


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fraction_str(x: Fraction) -> str:
    if x.denominator == 1:
        return str(x.numerator)
    return f"{float(x):.3f} ({x.numerator}/{x.denominator})"


def _load_checked(path: str) -> Problem:
    problem = load_problem(path)
    diags = validate_problem(problem)
    errors = [d for d in diags if d.is_error()]
    for d in diags:
        print(f"{d.severity} {d.code} at {d.where}: {d.message}", file=sys.stderr)
    if errors:
        raise DseError("E_INVALID_PROBLEM", f"{path}: {len(errors)} error(s)")
    return problem


def _sim_from_args(args) -> SimConfig:
    sim = SimConfig(frames=args.frames, warmup_frames=args.warmup)
    sim.validate()
    return sim


def cmd_run(args) -> int:
    spec = load_experiment(args.experiment)
    diags = validate_problem(spec.problem)
    if any(d.is_error() for d in diags):
        for d in diags:
            print(f"{d.severity} {d.code} at {d.where}: {d.message}", file=sys.stderr)
        raise DseError("E_INVALID_PROBLEM", "experiment problem failed validation")
    if args.seed is not None:
        spec.seeds = [args.seed + i for i in range(spec.repetitions)]
    if args.frames is not None or args.warmup is not None:
        spec.sim = replace(
            spec.sim,
            frames=args.frames if args.frames is not None else spec.sim.frames,
            warmup_frames=args.warmup if args.warmup is not None else spec.sim.warmup_frames,
        )
        spec.sim.validate()
    out = Path(args.out) if args.out else (spec.output or Path("results"))

    result = run_experiment(spec, jobs=args.jobs, quiet=args.quiet)
    written = emit_results(result, out)
    if not args.no_plots:
        from .report import render_figures

        written += render_figures(result, out)
    if not args.quiet:
        print(ComparisonTable.from_records(result.records).render())
        print(f"wrote {len(written)} files to {out}")
    return 0


def cmd_exhaustive(args) -> int:
    problem = _load_checked(args.problem)
    sim = _sim_from_args(args)
    report = exhaustive(problem, sim, cap=args.cap)

    from . import __version__

    result = ExperimentResult(
        records=[],
        logs=[],
        correlation=report,
        meta={
            "format": 1,
            "package": f"mapdse {__version__}",
            "problem": str(Path(args.problem).resolve()),
            "mappings": len(report.records),
            "sim": {"frames": sim.frames, "warmup_frames": sim.warmup_frames},
        },
    )
    out = Path(args.out)
    written = emit_results(result, out)
    if not args.no_plots:
        from .report import render_figures

        written += render_figures(result, out)
    if not args.quiet:
        best = problem.mapping_to_ids(report.best_mapping)
        pairs = ", ".join(
            f"{problem.task_ids[i]}={best[g]}"
            for g, i in enumerate(problem.gene_order)
        )
        print(f"mappings simulated: {len(report.records)}")
        print(f"best objective: {_fmt_objective(report.best_objective)}")
        print(f"best mapping: {pairs}")
        print(f"pearson(peak load, time): {report.pearson_makespan:.4f}")
        print(
            "low-makespan quartile objective means "
            f"(low/high imbalance half): {report.quartile_low_imbalance_mean:.1f}"
            f" / {report.quartile_high_imbalance_mean:.1f}"
        )
        print(f"wrote {len(written)} files to {out}")
    return 0


def _fmt_objective(obj) -> str:
    if isinstance(obj, Fraction):
        return _fraction_str(obj)
    return str(obj)


def cmd_gen(args) -> int:
    shapes = [PRESETS[name] for name in args.preset]
    if args.seed is not None:
        shapes = [replace(s, seed=args.seed + j) for j, s in enumerate(shapes)]
    problem = write_benchmark(shapes, args.out)
    if not args.quiet:
        print(
            f"wrote {args.out}: {problem.n_tasks} tasks, "
            f"{len(problem.channels)} channels, "
            f"{len(problem.proc_ids)} processors, "
            f"{mapping_space_size(problem)} mappings"
        )
    return 0


def cmd_eval(args) -> int:
    problem = _load_checked(args.problem)
    if args.mapping is not None:
        mapping = problem.mapping_from_ids(args.mapping.split(","))
    else:
        mapping = HEURISTICS[args.heuristic](problem)
    sim = _sim_from_args(args)

    trace_fh = None
    trace_cb = None
    if args.trace:
        trace_fh = open(args.trace, "w", encoding="utf-8", newline="\n")

        def trace_cb(t, where, task, what, detail):
            trace_fh.write(f"{t}\t{where}\t{task}\t{what}\t{detail}\n")

    try:
        result = simulate(problem, mapping, sim, trace=trace_cb)
    finally:
        if trace_fh is not None:
            trace_fh.close()

    if not args.quiet:
        ids = problem.mapping_to_ids(mapping)
        for g, i in enumerate(problem.gene_order):
            print(f"{problem.task_ids[i]} -> {ids[g]}")
        if result.deadlocked:
            print("deadlock: simulation did not complete")
        else:
            print(f"frame time (steady state): {_fraction_str(result.fet)} cycles")
            print(f"total time: {result.tet} cycles")
            print(f"objective: {_fmt_objective(objective_time(problem, result))}")
        for pid, cycles in result.usage.as_dict().items():
            print(f"usage {pid}: {cycles}")
        print(f"peak load: {makespan(result.usage)}")
        print(f"imbalance: {imbalance(result.usage)}")
        print(f"events: {result.events}")
    return 0


def cmd_validate(args) -> int:
    problem = load_problem(args.problem)
    diags = validate_problem(problem)
    for d in diags:
        print(f"{d.severity} {d.code} at {d.where}: {d.message}", file=sys.stderr)
    errors = sum(1 for d in diags if d.is_error())
    if errors:
        print(f"invalid: {errors} error(s), {len(diags) - errors} warning(s)")
        return 2
    if not args.quiet:
        print(
            f"ok: {problem.n_tasks} tasks, {len(problem.channels)} channels, "
            f"{len(problem.proc_ids)} processors, "
            f"{mapping_space_size(problem)} mappings, "
            f"{len(diags)} warning(s)"
        )
        order = " ".join(problem.task_ids[i] for i in problem.gene_order)
        print(f"gene order: {order}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="mapdse", description=__doc__.splitlines()[0])
    parser.add_argument("--quiet", action="store_true", help="suppress progress text")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="run an experiment file")
    p_run.add_argument("experiment", help="experiment JSON file")
    p_run.add_argument("-o", "--out", help="output directory (default from file)")
    p_run.add_argument("--seed", type=int, help="override seed base")
    p_run.add_argument("--jobs", type=int, default=os.cpu_count(),
                       help="parallel worker processes (default: cpu count)")
    p_run.add_argument("--frames", type=int, help="override simulated frames")
    p_run.add_argument("--warmup", type=int, help="override warmup frames")
    p_run.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    p_run.set_defaults(func=cmd_run)

    p_ex = sub.add_parser("exhaustive", help="simulate every mapping")
    p_ex.add_argument("problem", help="problem JSON file")
    p_ex.add_argument("-o", "--out", default="exhaustive_out", help="output directory")
    p_ex.add_argument("--cap", type=int, default=10**6,
                      help="refuse spaces larger than this (default 1e6)")
    p_ex.add_argument("--frames", type=int, default=12)
    p_ex.add_argument("--warmup", type=int, default=2)
    p_ex.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    p_ex.set_defaults(func=cmd_exhaustive)

    p_gen = sub.add_parser("gen", help="generate a benchmark problem")
    p_gen.add_argument("preset", nargs="+", choices=sorted(PRESETS),
                       help="app presets; several merge onto one platform")
    p_gen.add_argument("-o", "--out", required=True, help="problem file to write")
    p_gen.add_argument("--seed", type=int, help="override preset seeds")
    p_gen.set_defaults(func=cmd_gen)

    p_eval = sub.add_parser("eval", help="simulate one mapping")
    p_eval.add_argument("problem", help="problem JSON file")
    which = p_eval.add_mutually_exclusive_group(required=True)
    which.add_argument("--mapping",
                       help="comma-separated processor ids in gene order")
    which.add_argument("--heuristic", choices=sorted(HEURISTICS),
                       help="construct the mapping with a heuristic")
    p_eval.add_argument("--frames", type=int, default=12)
    p_eval.add_argument("--warmup", type=int, default=2)
    p_eval.add_argument("--trace", help="write a tab-separated event trace here")
    p_eval.set_defaults(func=cmd_eval)

    p_val = sub.add_parser("validate", help="check a problem file")
    p_val.add_argument("problem", help="problem JSON file")
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DseError as e:
        print(f"mapdse: {e}", file=sys.stderr)
        return 3 if e.code == "E_IO" else 2
    except OSError as e:
        print(f"mapdse: i/o error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
