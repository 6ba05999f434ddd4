"""Experiment harness: benchmark generation, batch runs, enumeration.

The harness ties the other modules together: it generates synthetic
benchmark problems, runs repeated seeded searches for several algorithm
configurations, exhaustively enumerates small mapping spaces to obtain
ground truth, and serializes everything to delimited files plus a
metadata JSON.

Determinism contract: given the same problem bytes and the same seeds,
``comparison.csv``, ``convergence.csv``, and ``correlation.csv`` are
reproduced byte for byte. Wall-clock measurements are real and therefore
live in ``timing.csv`` and ``run_meta.json``, which are exempt.
"""

from __future__ import annotations

import json
import platform as _platform
import random
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from itertools import product
from pathlib import Path
from typing import Optional, Sequence, Union

from .errors import DseError
from .ga import GaConfig, Objective, RunLog, GenRecord, evolve, preset_config
from .heuristics import HEURISTICS
from .metrics import imbalance, makespan
from .model import (
    AppGraph,
    Channel,
    Mapping,
    Platform,
    Problem,
    Processor,
    Task,
    load_problem,
    mapping_space_size,
    merge_apps,
    save_problem,
)
from .simulator import SimConfig, objective_time, simulate

EXPERIMENT_FORMAT = 1


# -- synthetic benchmarks -------------------------------------------------


@dataclass(frozen=True)
class GenShape:
    """Parameters for one generated streaming app (plus platform shape)."""

    name: str
    tasks: int
    free_processors: int = 5
    processor_types: int = 5
    io_processors: int = 1
    pinned_tasks: int = 2
    extra_edge_prob: float = 0.35
    compute_base: tuple[int, int] = (300, 1500)
    hetero_spread: float = 2.0
    local_cost: tuple[int, int] = (1, 4)
    shared_factor: tuple[int, int] = (4, 9)
    tokens_per_firing: tuple[int, int] = (1, 2)
    token_size: tuple[int, int] = (1, 4)
    capacity: int = 8
    bus_word_cycles: int = 1
    seed: int = 0

    def validate(self) -> None:
        if self.tasks < 1:
            raise DseError("E_BAD_SHAPE", "tasks must be >= 1")
        if self.free_processors < 1:
            raise DseError("E_BAD_SHAPE", "free_processors must be >= 1")
        if not 1 <= self.processor_types <= self.free_processors:
            raise DseError("E_BAD_SHAPE", "need 1 <= processor_types <= free_processors")
        if self.pinned_tasks > self.tasks:
            raise DseError("E_BAD_SHAPE", "more pinned tasks than tasks")
        if self.pinned_tasks > 0 and self.io_processors < 1:
            raise DseError("E_BAD_SHAPE", "pinned tasks need io processors")


PRESETS: dict[str, GenShape] = {
    # 27-task codec-like pipeline on 5 heterogeneous cores plus one
    # reserved I/O core; source and sink pinned, 5**25 free mappings.
    "mp3like": GenShape(name="mp3like", tasks=27, pinned_tasks=2, seed=101),
    "mjpeg8": GenShape(name="mjpeg8", tasks=8, pinned_tasks=2, seed=202),
    "sobel6": GenShape(name="sobel6", tasks=6, pinned_tasks=2, seed=303),
    # small instance whose 3**8 = 6561 mappings can be enumerated
    "tiny8x3": GenShape(
        name="tiny8x3", tasks=8, free_processors=3, processor_types=3,
        io_processors=0, pinned_tasks=0, seed=404,
    ),
}


def _gen_platform(shape: GenShape) -> Platform:
    procs = [
        Processor(id=f"pe{k}", type=f"t{k % shape.processor_types}")
        for k in range(shape.free_processors)
    ]
    procs += [
        Processor(id=f"io{j}", type="io", pinned_only=True)
        for j in range(shape.io_processors)
    ]
    return Platform(processors=tuple(procs), bus_word_cycles=shape.bus_word_cycles)


def _gen_app(shape: GenShape, rng: random.Random) -> AppGraph:
    n = shape.tasks
    types = [f"t{j}" for j in range(shape.processor_types)]
    spread = shape.hetero_spread

    pinned: dict[int, str] = {}
    front = (shape.pinned_tasks + 1) // 2
    back = shape.pinned_tasks - front
    for j in range(front):
        pinned[j] = f"io{j % max(shape.io_processors, 1)}"
    for j in range(back):
        pinned[n - 1 - j] = f"io{(front + j) % max(shape.io_processors, 1)}"

    tasks = []
    for i in range(n):
        base = rng.randint(*shape.compute_base)
        cost = {}
        for ty in types:
            factor = rng.uniform(1.0 / spread, spread)
            cost[ty] = max(1, round(base * factor))
        if shape.io_processors > 0:
            # cheap I/O work for pinned endpoints, irrelevant for the rest
            cost["io"] = rng.randint(20, 80) if i in pinned else base
        tasks.append(
            Task(id=f"t{i:02d}", compute_cost=cost, pinned_to=pinned.get(i))
        )

    edges = [(i, i + 1) for i in range(n - 1)]
    present = set(edges)
    for i in range(n - 2):
        if rng.random() < shape.extra_edge_prob:
            j = rng.randrange(i + 2, min(i + 2 + 6, n))
            if (i, j) not in present:
                edges.append((i, j))
                present.add((i, j))

    channels = []
    for e, (i, j) in enumerate(edges):
        local = rng.randint(*shape.local_cost)
        tpf = rng.randint(*shape.tokens_per_firing)
        channels.append(
            Channel(
                id=f"c{e:02d}",
                src=f"t{i:02d}",
                dst=f"t{j:02d}",
                tokens_per_firing=tpf,
                token_size=rng.randint(*shape.token_size),
                capacity=max(shape.capacity, 2 * tpf),
                cost_local=local,
                cost_shared=local * rng.randint(*shape.shared_factor),
            )
        )
    return AppGraph(name=shape.name, tasks=tuple(tasks), channels=tuple(channels))


def gen_benchmark(shapes: Union[GenShape, Sequence[GenShape]]) -> Problem:
    """Generate one problem from one or more app shapes.

    All shapes must agree on the platform dimensions; each app uses its
    own seed, so a preset always generates identical content.
    """
    if isinstance(shapes, GenShape):
        shapes = [shapes]
    if not shapes:
        raise DseError("E_BAD_SHAPE", "need at least one shape")
    for s in shapes:
        s.validate()
    first = shapes[0]
    for s in shapes[1:]:
        same = (
            s.free_processors == first.free_processors
            and s.processor_types == first.processor_types
            and s.io_processors == first.io_processors
            and s.bus_word_cycles == first.bus_word_cycles
        )
        if not same:
            raise DseError("E_SHAPE_MISMATCH", "apps must share one platform shape")
    platform = _gen_platform(first)
    apps = [_gen_app(s, random.Random(s.seed)) for s in shapes]
    return merge_apps(apps, platform)


# -- exhaustive enumeration ----------------------------------------------


@dataclass(frozen=True)
class MappingRecord:
    index: int
    makespan: int
    imbalance: int
    objective: Objective


@dataclass
class CorrelationReport:
    records: list[MappingRecord]
    pearson_makespan: float
    best_index: int
    best_mapping: Mapping
    best_objective: Objective
    quartile_low_imbalance_mean: float
    quartile_high_imbalance_mean: float


def enumerate_mappings(problem: Problem):
    """Lexicographic enumeration over free genes (pinned genes fixed)."""
    template = [0] * len(problem.gene_order)
    for g, i in enumerate(problem.gene_order):
        pin = problem.pinned_proc[i]
        if pin is not None:
            template[g] = pin
    free_genes = problem.free_genes
    if not free_genes:
        yield Mapping(tuple(template))
        return
    for combo in product(problem.free_procs, repeat=len(free_genes)):
        genes = list(template)
        for g, k in zip(free_genes, combo):
            genes[g] = k
        yield Mapping(tuple(genes))


def exhaustive(
    problem: Problem, sim: SimConfig = SimConfig(), cap: int = 10**6
) -> CorrelationReport:
    """Simulate every mapping; relate analytic load metrics to time."""
    size = mapping_space_size(problem)
    if size > cap:
        raise DseError(
            "E_SPACE_TOO_LARGE", f"{size} mappings exceed the cap of {cap}"
        )
    records: list[MappingRecord] = []
    best: Optional[tuple[Objective, int, Mapping]] = None
    for index, m in enumerate(enumerate_mappings(problem)):
        result = simulate(problem, m, sim)
        usage = result.usage
        obj = objective_time(problem, result)
        records.append(
            MappingRecord(index, makespan(usage), imbalance(usage), obj)
        )
        if best is None or obj < best[0]:
            best = (obj, index, m)

    finite = [r for r in records if float(r.objective) != float("inf")]
    try:
        pearson = statistics.correlation(
            [float(r.makespan) for r in finite],
            [float(r.objective) for r in finite],
        )
    except statistics.StatisticsError:
        pearson = float("nan")

    by_makespan = sorted(finite, key=lambda r: (r.makespan, r.index))
    quart = by_makespan[: max(1, len(by_makespan) // 4)]
    by_imb = sorted(quart, key=lambda r: (r.imbalance, r.index))
    half = len(by_imb) // 2
    low, high = by_imb[:half], by_imb[half:]
    if not low:
        low = high
    mean = lambda rs: sum(float(r.objective) for r in rs) / len(rs)  # noqa: E731

    return CorrelationReport(
        records=records,
        pearson_makespan=pearson,
        best_index=best[1],
        best_mapping=best[2],
        best_objective=best[0],
        quartile_low_imbalance_mean=mean(low),
        quartile_high_imbalance_mean=mean(high),
    )


# -- experiments ----------------------------------------------------------


@dataclass
class AlgorithmSpec:
    name: str
    kind: str  # "ga" | "heuristic"
    config: Optional[GaConfig] = None
    heuristic: Optional[str] = None


@dataclass
class ExperimentSpec:
    problem: Problem
    algorithms: list[AlgorithmSpec]
    repetitions: int = 1
    seeds: Optional[list[int]] = None  # default: 0, 1, ...
    sim: SimConfig = field(default_factory=SimConfig)
    output: Optional[Path] = None
    problem_path: Optional[str] = None

    def seed_list(self) -> list[int]:
        if self.seeds is None:
            return list(range(self.repetitions))
        if len(self.seeds) < self.repetitions:
            raise DseError("E_SPEC_INVALID", "fewer seeds than repetitions")
        return list(self.seeds[: self.repetitions])


@dataclass(frozen=True)
class RunRecord:
    algorithm: str
    rep: int
    seed: int
    objective: Objective
    seconds: float
    generations: int
    evaluations: int
    mapping_ids: tuple[str, ...]


@dataclass
class ExperimentResult:
    records: list[RunRecord]
    logs: list[RunLog]
    correlation: Optional[CorrelationReport] = None
    meta: dict = field(default_factory=dict)


def _ga_fields() -> set[str]:
    return {f.name for f in fields(GaConfig)}


def parse_algorithm(entry: dict) -> AlgorithmSpec:
    if not isinstance(entry, dict) or "name" not in entry:
        raise DseError("E_SPEC_INVALID", "algorithm entries need a name")
    name = entry["name"]
    has_preset = "preset" in entry
    has_heur = "heuristic" in entry
    if has_preset == has_heur:
        raise DseError(
            "E_SPEC_INVALID",
            f"algorithm {name!r} needs exactly one of preset/heuristic",
        )
    if has_heur:
        tag = entry["heuristic"]
        if tag not in HEURISTICS:
            raise DseError("E_SPEC_INVALID", f"unknown heuristic {tag!r}")
        extras = set(entry) - {"name", "heuristic"}
        if extras:
            raise DseError("E_SPEC_INVALID", f"unknown keys {sorted(extras)}")
        return AlgorithmSpec(name=name, kind="heuristic", heuristic=tag)
    overrides = {k: v for k, v in entry.items() if k not in ("name", "preset")}
    unknown = set(overrides) - _ga_fields()
    if unknown:
        raise DseError("E_SPEC_INVALID", f"unknown GA keys {sorted(unknown)}")
    try:
        cfg = preset_config(entry["preset"], **overrides)
        cfg.validate()
    except DseError as e:
        raise DseError("E_SPEC_INVALID", f"algorithm {name!r}: {e.message}") from e
    return AlgorithmSpec(name=name, kind="ga", config=cfg)


def load_experiment(path: Union[str, Path]) -> ExperimentSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise DseError("E_IO", f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise DseError("E_SPEC_INVALID", f"{path} is not valid JSON: {e}") from e
    if not isinstance(data, dict) or data.get("format") != EXPERIMENT_FORMAT:
        raise DseError("E_SPEC_INVALID", f"{path}: expected format {EXPERIMENT_FORMAT}")
    if "problem" not in data or "algorithms" not in data:
        raise DseError("E_SPEC_INVALID", f"{path}: need problem and algorithms")

    problem_path = (path.parent / data["problem"]).resolve()
    problem = load_problem(problem_path)

    algorithms = [parse_algorithm(e) for e in data["algorithms"]]
    names = [a.name for a in algorithms]
    if len(set(names)) != len(names):
        raise DseError("E_SPEC_INVALID", "algorithm names must be unique")
    if not algorithms:
        raise DseError("E_SPEC_INVALID", "need at least one algorithm")

    repetitions = int(data.get("repetitions", 1))
    if repetitions < 1:
        raise DseError("E_SPEC_INVALID", "repetitions must be >= 1")

    seeds = data.get("seeds")
    if seeds is None:
        seed_list = None
    elif isinstance(seeds, list):
        seed_list = [int(s) for s in seeds]
    elif isinstance(seeds, dict) and "base" in seeds:
        base = int(seeds["base"])
        seed_list = [base + i for i in range(repetitions)]
    elif isinstance(seeds, int):
        seed_list = [seeds + i for i in range(repetitions)]
    else:
        raise DseError("E_SPEC_INVALID", "seeds must be a list, int, or {base}")

    sim_d = data.get("sim", {})
    extras = set(sim_d) - {"frames", "warmup_frames", "deadlock_horizon"}
    if extras:
        raise DseError("E_SPEC_INVALID", f"unknown sim keys {sorted(extras)}")
    sim = SimConfig(**sim_d)
    sim.validate()

    output = data.get("output")
    return ExperimentSpec(
        problem=problem,
        algorithms=algorithms,
        repetitions=repetitions,
        seeds=seed_list,
        sim=sim,
        output=(path.parent / output) if output else None,
        problem_path=str(problem_path),
    )


def _run_unit(problem: Problem, algo: AlgorithmSpec, rep: int, seed: int,
              sim: SimConfig) -> tuple[RunRecord, RunLog]:
    t0 = time.perf_counter()
    if algo.kind == "ga":
        cfg = replace(algo.config, seed=seed)
        best, log = evolve(problem, cfg, lambda m: simulate(problem, m, sim))
        log.algorithm = algo.name
        seconds = time.perf_counter() - t0
        record = RunRecord(
            algorithm=algo.name,
            rep=rep,
            seed=seed,
            objective=log.best_objective,
            seconds=seconds,
            generations=log.records[-1].generation,
            evaluations=log.evaluations,
            mapping_ids=tuple(problem.mapping_to_ids(best)),
        )
        return record, log
    mapping = HEURISTICS[algo.heuristic](problem)
    result = simulate(problem, mapping, sim)
    obj = objective_time(problem, result)
    seconds = time.perf_counter() - t0
    log = RunLog(
        algorithm=algo.name,
        seed=seed,
        records=[GenRecord(0, obj, 1, seconds, carried=0, offspring=0)],
        best_mapping=mapping,
        best_objective=obj,
        termination="constructive",
        evaluations=1,
        wall_seconds=seconds,
    )
    record = RunRecord(
        algorithm=algo.name,
        rep=rep,
        seed=seed,
        objective=obj,
        seconds=seconds,
        generations=0,
        evaluations=1,
        mapping_ids=tuple(problem.mapping_to_ids(mapping)),
    )
    return record, log


def run_experiment(
    spec: ExperimentSpec, jobs: Optional[int] = None, quiet: bool = True
) -> ExperimentResult:
    """Run every algorithm x repetition; results are seed-deterministic
    and independent of ``jobs``."""
    seeds = spec.seed_list()
    units = [
        (algo, rep, seeds[rep])
        for algo in spec.algorithms
        for rep in range(spec.repetitions)
    ]
    t0 = time.perf_counter()
    outcomes: list[tuple[RunRecord, RunLog]] = []
    if jobs is not None and jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_run_unit, spec.problem, algo, rep, seed, spec.sim)
                for algo, rep, seed in units
            ]
            for fut, (algo, rep, _) in zip(futures, units):
                outcomes.append(fut.result())
                if not quiet:
                    print(f"done {algo.name} rep {rep}", file=sys.stderr)
    else:
        for algo, rep, seed in units:
            outcomes.append(_run_unit(spec.problem, algo, rep, seed, spec.sim))
            if not quiet:
                print(f"done {algo.name} rep {rep}", file=sys.stderr)

    from . import __version__

    records = [r for r, _ in outcomes]
    logs = [l for _, l in outcomes]
    meta = {
        "format": EXPERIMENT_FORMAT,
        "package": f"mapdse {__version__}",
        "python": _platform.python_version(),
        "problem": spec.problem_path,
        "repetitions": spec.repetitions,
        "seeds": seeds,
        "sim": {
            "frames": spec.sim.frames,
            "warmup_frames": spec.sim.warmup_frames,
            "deadlock_horizon": spec.sim.deadlock_horizon,
        },
        "algorithms": [a.name for a in spec.algorithms],
        "jobs": jobs or 1,
        "wall_seconds_total": time.perf_counter() - t0,
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    return ExperimentResult(records=records, logs=logs, meta=meta)


# -- comparison table and serialization -----------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    algorithm: str
    runs: int
    best: float
    worst: float
    mean: float
    min_seconds: float
    max_seconds: float
    mean_seconds: float
    mean_evaluations: float


@dataclass
class ComparisonTable:
    rows: list[ComparisonRow]

    @classmethod
    def from_records(cls, records: Sequence[RunRecord]) -> "ComparisonTable":
        rows = []
        seen: list[str] = []
        for r in records:
            if r.algorithm not in seen:
                seen.append(r.algorithm)
        for name in seen:
            rs = [r for r in records if r.algorithm == name]
            objs = [float(r.objective) for r in rs]
            secs = [r.seconds for r in rs]
            rows.append(
                ComparisonRow(
                    algorithm=name,
                    runs=len(rs),
                    best=min(objs),
                    worst=max(objs),
                    mean=sum(objs) / len(objs),
                    min_seconds=min(secs),
                    max_seconds=max(secs),
                    mean_seconds=sum(secs) / len(secs),
                    mean_evaluations=sum(r.evaluations for r in rs) / len(rs),
                )
            )
        return cls(rows)

    def render(self) -> str:
        head = ("algorithm", "runs", "best", "worst", "mean", "s/run", "evals")
        body = [
            (
                r.algorithm,
                str(r.runs),
                _fmt_float(r.best),
                _fmt_float(r.worst),
                _fmt_float(r.mean),
                f"{r.mean_seconds:.2f}",
                f"{r.mean_evaluations:.1f}",
            )
            for r in self.rows
        ]
        widths = [
            max(len(head[c]), *(len(b[c]) for b in body)) if body else len(head[c])
            for c in range(len(head))
        ]
        lines = [
            "  ".join(h.ljust(w) for h, w in zip(head, widths)),
            "  ".join("-" * w for w in widths),
        ]
        lines += ["  ".join(v.ljust(w) for v, w in zip(b, widths)) for b in body]
        return "\n".join(lines)


def _fmt_obj(o: Objective) -> str:
    if isinstance(o, Fraction):
        if o.denominator == 1:
            return str(o.numerator)
        return repr(float(o))
    if isinstance(o, int):
        return str(o)
    return repr(o)


def _fmt_float(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return f"{v:.1f}"


def emit_results(result: ExperimentResult, out_dir: Union[str, Path]) -> list[Path]:
    """Write CSVs (LF line endings, headers always present) plus metadata."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def csv_write(name: str, header: Sequence[str], rows) -> Path:
        p = out / name
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(row) + "\n")
        written.append(p)
        return p

    csv_write(
        "comparison.csv",
        ("algorithm", "rep", "seed", "objective", "generations", "evaluations"),
        (
            (r.algorithm, str(r.rep), str(r.seed), _fmt_obj(r.objective),
             str(r.generations), str(r.evaluations))
            for r in result.records
        ),
    )
    csv_write(
        "convergence.csv",
        ("algorithm", "rep", "generation", "best_so_far"),
        (
            (log.algorithm, str(record.rep), str(g.generation), _fmt_obj(g.best_so_far))
            for record, log in zip(result.records, result.logs)
            for g in log.records
        ),
    )
    if result.correlation is not None:
        csv_write(
            "correlation.csv",
            ("mapping_index", "makespan", "imbalance", "objective"),
            (
                (str(r.index), str(r.makespan), str(r.imbalance), _fmt_obj(r.objective))
                for r in result.correlation.records
            ),
        )
    # wall-clock measurements are nondeterministic, so they live here
    # instead of the CSVs, which stay reproducible byte for byte
    meta = dict(result.meta)
    meta["run_seconds"] = [
        {"algorithm": r.algorithm, "rep": r.rep, "seed": r.seed,
         "seconds": round(r.seconds, 6)}
        for r in result.records
    ]
    meta_path = out / "run_meta.json"
    meta_path.write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    written.append(meta_path)
    return written


def write_benchmark(shapes: Union[GenShape, Sequence[GenShape]],
                    path: Union[str, Path]) -> Problem:
    problem = gen_benchmark(shapes)
    save_problem(problem, path)
    return problem
