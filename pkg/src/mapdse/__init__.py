"""Task-mapping design-space exploration for shared-memory multiprocessors.

The package models streaming applications as token-passing task graphs,
scores a task-to-processor mapping with a deterministic discrete-event
simulator, and searches the mapping space with load-guided genetic
algorithms next to classical one-shot heuristics.

Typical use::

    from mapdse import PRESETS, gen_benchmark, preset_config, evolve, simulate

    problem = gen_benchmark(PRESETS["mjpeg8"])
    cfg = preset_config("beg", seed=7)
    best, log = evolve(problem, cfg, lambda m: simulate(problem, m))
    print(log.best_objective, problem.mapping_to_ids(best))
"""

from .errors import DseError
from .ga import (
    GaConfig,
    GenRecord,
    RunLog,
    evolve,
    fitness_of,
    initial_population,
    mutate_beg,
    mutate_three_step,
    preset_config,
)
from .harness import (
    PRESETS,
    AlgorithmSpec,
    ComparisonTable,
    CorrelationReport,
    ExperimentResult,
    ExperimentSpec,
    GenShape,
    RunRecord,
    emit_results,
    exhaustive,
    gen_benchmark,
    load_experiment,
    run_experiment,
    write_benchmark,
)
from .heuristics import HEURISTICS, mct, met, min_min, orb_like
from .metrics import (
    MigrationBenefit,
    UsageVector,
    imbalance,
    makespan,
    migration_benefit,
    pusage,
    usage_variance,
)
from .model import (
    AppGraph,
    Channel,
    Diagnostic,
    Mapping,
    Platform,
    Problem,
    Processor,
    Task,
    load_problem,
    mapping_space_size,
    merge_apps,
    random_mapping,
    save_problem,
    validate_mapping,
    validate_problem,
)
from .simulator import EvalResult, SimConfig, objective_time, simulate

__version__ = "0.1.0"

__all__ = [
    "AlgorithmSpec",
    "AppGraph",
    "Channel",
    "ComparisonTable",
    "CorrelationReport",
    "Diagnostic",
    "DseError",
    "EvalResult",
    "ExperimentResult",
    "ExperimentSpec",
    "GaConfig",
    "GenRecord",
    "GenShape",
    "HEURISTICS",
    "Mapping",
    "MigrationBenefit",
    "PRESETS",
    "Platform",
    "Problem",
    "Processor",
    "RunLog",
    "RunRecord",
    "SimConfig",
    "Task",
    "UsageVector",
    "emit_results",
    "evolve",
    "exhaustive",
    "fitness_of",
    "gen_benchmark",
    "imbalance",
    "initial_population",
    "load_experiment",
    "load_problem",
    "makespan",
    "mapping_space_size",
    "mct",
    "merge_apps",
    "met",
    "migration_benefit",
    "min_min",
    "mutate_beg",
    "mutate_three_step",
    "objective_time",
    "orb_like",
    "preset_config",
    "pusage",
    "random_mapping",
    "run_experiment",
    "save_problem",
    "simulate",
    "usage_variance",
    "validate_mapping",
    "validate_problem",
    "write_benchmark",
]
